"""Random population structure: households, workplaces, movers, complexes.

The deterministic backbone assigns individual i to household i // h and to
original workplace i // w, so workplace j owns households j*d .. (j+1)*d - 1.
Each individual is independently a mover with probability theta; movers are
mapped onto the vacated workplace spots by a uniformly random bijection (a
mover may land back in its own original workplace, including its own spot).

Data layout is flat arrays indexed by individual id plus inverted member
tables, giving O(1) neighbour enumeration during simulation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ModelParams, SeedSpec, ConfigError, STREAM_POPULATION


@dataclass(frozen=True)
class Population:
    """A realized assignment of n individuals to households and workplaces."""

    h: int
    d: int
    household: np.ndarray        # (n,) household id of each individual
    orig_workplace: np.ndarray   # (n,) deterministic original workplace
    final_workplace: np.ndarray  # (n,) workplace after mover reallocation
    mover: np.ndarray            # (n,) bool
    household_members: np.ndarray = field(repr=False, default=None)  # (n/h, h)
    workplace_members: np.ndarray = field(repr=False, default=None)  # (n/w, w)

    def __post_init__(self):
        if self.household_members is None:
            object.__setattr__(self, "household_members",
                               np.arange(self.n).reshape(-1, self.h))
        if self.workplace_members is None:
            order = np.argsort(self.final_workplace, kind="stable")
            object.__setattr__(self, "workplace_members",
                               order.reshape(-1, self.w).astype(np.int64))

    @property
    def n(self) -> int:
        return self.household.size

    @property
    def w(self) -> int:
        return self.d * self.h

    @property
    def n_workplaces(self) -> int:
        return self.n // self.w

    def validate(self):
        """Check the structural invariants; raises ConfigError on violation."""
        n, h, w = self.n, self.h, self.w
        if n % w != 0:
            raise ConfigError("population size is not a multiple of w")
        if not np.array_equal(self.household, np.arange(n) // h):
            raise ConfigError("household ids must follow the block partition")
        if not np.array_equal(self.orig_workplace, np.arange(n) // w):
            raise ConfigError("original workplaces must follow the block partition")
        stay = self.final_workplace == self.orig_workplace
        if np.any(~self.mover & ~stay):
            raise ConfigError("remainers must keep their original workplace")
        counts = np.bincount(self.final_workplace, minlength=n // w)
        if counts.size != n // w or np.any(counts != w):
            raise ConfigError("every final workplace must have exactly w members")
        # vacated spots per workplace are exactly refilled
        out_count = np.bincount(self.orig_workplace[self.mover], minlength=n // w)
        in_count = np.bincount(self.final_workplace[self.mover], minlength=n // w)
        if not np.array_equal(out_count, in_count):
            raise ConfigError("mover reallocation does not refill vacated spots")


def generate(params: ModelParams, seed: SeedSpec | np.random.Generator) -> Population:
    """Generate a Population; pure function of (params, seed)."""
    if params.n is None:
        raise ConfigError("params.n must be set to generate a population")
    n, h, w = params.n, params.h, params.w
    rng = seed.rng(STREAM_POPULATION) if isinstance(seed, SeedSpec) else seed
    household = np.arange(n) // h
    orig_wp = np.arange(n) // w
    mover = rng.random(n) < params.theta
    final_wp = orig_wp.copy()
    movers = np.flatnonzero(mover)
    if movers.size:
        # each mover vacates its own spot; the spot list is therefore the
        # movers' original workplaces, and a uniform permutation of it is a
        # uniform bijection movers -> spots
        spots = orig_wp[movers]
        final_wp[movers] = spots[rng.permutation(movers.size)]
    return Population(h=params.h, d=params.d, household=household,
                      orig_workplace=orig_wp, final_workplace=final_wp,
                      mover=mover)


@dataclass(frozen=True)
class Complex:
    """The unit associated with one workplace.

    household_groups[j] = (remainers, movers_out) of the j-th household that
    originally comprised the workplace; movers_in are the individuals who
    moved into the workplace.  A mover landing back in its own original
    workplace appears both as a mover_out and as a mover_in of the same
    complex (two roles, one complex).
    """

    workplace: int
    household_groups: tuple          # d pairs of int arrays
    movers_in: np.ndarray

    @property
    def group_sizes(self) -> tuple:
        sizes = []
        for rem, out in self.household_groups:
            sizes += [rem.size, out.size]
        sizes.append(self.movers_in.size)
        return tuple(sizes)


def extract_complexes(pop: Population) -> list[Complex]:
    """Decompose a population into one Complex per workplace."""
    d, h = pop.d, pop.h
    out = []
    # movers into each workplace, grouped via the stable member table
    for i in range(pop.n_workplaces):
        groups = []
        for j in range(d):
            hh = i * d + j
            members = pop.household_members[hh]
            is_mover = pop.mover[members]
            groups.append((members[~is_mover], members[is_mover]))
        wp_members = pop.workplace_members[i]
        movers_in = wp_members[pop.mover[wp_members]]
        out.append(Complex(workplace=i, household_groups=tuple(groups),
                           movers_in=movers_in))
    return out


CSV_SCHEMA = "#schema=v1"
_CSV_HEADER = "individual,household,orig_workplace,final_workplace,mover"


def write_population_csv(pop: Population, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_SCHEMA + "\n")
        fh.write(_CSV_HEADER + "\n")
        for i in range(pop.n):
            fh.write(f"{i},{pop.household[i]},{pop.orig_workplace[i]},"
                     f"{pop.final_workplace[i]},{int(pop.mover[i])}\n")


def read_population_csv(path, h: int, d: int) -> Population:
    """Load a population CSV and validate all structural invariants."""
    data = np.loadtxt(path, delimiter=",", skiprows=2, dtype=np.int64, ndmin=2)
    if data.shape[1] != 5:
        raise ConfigError("population CSV must have 5 columns")
    order = np.argsort(data[:, 0])
    data = data[order]
    pop = Population(h=h, d=d, household=data[:, 1],
                     orig_workplace=data[:, 2], final_workplace=data[:, 3],
                     mover=data[:, 4].astype(bool))
    pop.validate()
    return pop
