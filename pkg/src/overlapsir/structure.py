"""Seeded complex structures and within-complex contact rates.

A complex is the unit associated with one workplace: for each of its d
original households a group of remainers (odd groups 1, 3, ..., 2d-1) and a
group of movers-out (even groups 2, 4, ..., 2d), plus the group 2d+1 of
movers-in.  Here groups are 0-indexed: index 2j-2 holds the remainers of
household j, index 2j-1 its movers-out, index 2d the movers-in.

The structure of a complex is informative about the type of its seed:

  R: the seed is a remainer, placed in group index 0; the other h-1 members
     of its household flip mover coins, so M_1 ~ Bin(h-1, theta).
  H: the seed is a mover-out of household 1, so group index 1 holds 1 + M_1
     movers with M_1 ~ Bin(h-1, theta), and the workplace carries one forced
     vacancy: the movers-in group holds 1 + sum(M).
  W: the seed is a mover-in.  The workplace it enters is size-biased by its
     number of vacancies; size-biasing the i.i.d. Bin(h, theta) household
     counts is realized by forcing one extra mover into household 1, giving
     the same group sizes as the H case with the seed in the movers-in group.

Households 2..d always have M_j ~ Bin(h, theta) movers.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from .params import ModelParams, ConfigError


SEED_TYPES = ("R", "H", "W")


def rate_matrix(h: int, d: int, beta_h_pair: float, beta_w_pair: float) -> np.ndarray:
    """Per-pair infection rate between (ordered) group indices.

    Within an odd-numbered group the pair shares household and workplace;
    household-only pairs live inside a household block {2j-1, 2j}; workplace
    pairs join the odd groups with the movers-in group; movers-out have no
    contact outside their household block.
    """
    g = 2 * d + 1
    rates = np.zeros((g, g))
    for a in range(g):
        for b in range(g):
            a_in, b_in = a == g - 1, b == g - 1
            a_rem, b_rem = (not a_in) and a % 2 == 0, (not b_in) and b % 2 == 0
            same_block = (not a_in) and (not b_in) and a // 2 == b // 2
            in_workplace = (a_rem or a_in) and (b_rem or b_in)
            r = 0.0
            if same_block:
                r += beta_h_pair
            if in_workplace:
                r += beta_w_pair
            rates[a, b] = r
    return rates


@dataclass(frozen=True)
class SeededComplexStructure:
    """Group sizes of one complex together with the seed placement."""

    h: int
    d: int
    sizes: tuple           # length 2d+1
    seed_type: str         # R, H or W
    seed_group: int        # group index containing the seed

    def __post_init__(self):
        if self.seed_type not in SEED_TYPES:
            raise ConfigError(f"bad seed type {self.seed_type!r}")
        w = self.d * self.h
        realized = sum(self.sizes[::2])  # odd groups plus movers-in
        assert realized == w, "realized workplace must have exactly w members"
        assert self.sizes[self.seed_group] >= 1

    @property
    def n_groups(self) -> int:
        return 2 * self.d + 1

    @property
    def total(self) -> int:
        return sum(self.sizes)


def _sizes_from_m(h: int, d: int, m, seed_type: str):
    m = tuple(int(v) for v in m)
    if seed_type == "R":
        sizes = []
        for mj in m:
            sizes += [h - mj, mj]
        sizes.append(sum(m))
        return tuple(sizes), 0
    sizes = [h - 1 - m[0], 1 + m[0]]
    for mj in m[1:]:
        sizes += [h - mj, mj]
    sizes.append(1 + sum(m))
    return tuple(sizes), (1 if seed_type == "H" else 2 * d)


def structure_from_m(params: ModelParams, m, seed_type: str) -> SeededComplexStructure:
    sizes, seed_group = _sizes_from_m(params.h, params.d, m, seed_type)
    return SeededComplexStructure(h=params.h, d=params.d, sizes=sizes,
                                  seed_type=seed_type, seed_group=seed_group)


def sample_structure_ms(params: ModelParams, seed_type: str,
                        rng: np.random.Generator, size: int) -> np.ndarray:
    """Sample the mover-count vectors M for `size` seeded complexes."""
    if seed_type not in SEED_TYPES:
        raise ConfigError(f"bad seed type {seed_type!r}")
    if seed_type in ("H", "W") and params.theta == 0:
        raise ConfigError("no movers exist when theta = 0")
    h, d, theta = params.h, params.d, params.theta
    m = np.empty((size, d), dtype=np.int64)
    m[:, 0] = rng.binomial(h - 1, theta, size)
    for j in range(1, d):
        m[:, j] = rng.binomial(h, theta, size)
    return m


def sample_structure(params: ModelParams, seed_type: str,
                     rng: np.random.Generator) -> SeededComplexStructure:
    """Draw one seeded complex structure."""
    m = sample_structure_ms(params, seed_type, rng, 1)[0]
    return structure_from_m(params, m, seed_type)


def enumerate_structures(params: ModelParams, seed_type: str):
    """All (probability, structure) pairs; the M support is finite.

    Used by the exact constant-period route to mix complex outcomes over the
    structure law without sampling error.
    """
    if seed_type in ("H", "W") and params.theta == 0:
        raise ConfigError("no movers exist when theta = 0")
    h, d, theta = params.h, params.d, params.theta

    def binpmf(n, k):
        return comb(n, k) * theta**k * (1.0 - theta)**(n - k)

    out = []
    for m in itertools.product(range(h), *[range(h + 1)] * (d - 1)):
        p = binpmf(h - 1, m[0])
        for mj in m[1:]:
            p *= binpmf(h, mj)
        if p <= 0.0:
            continue
        out.append((p, structure_from_m(params, m, seed_type)))
    return out


# fine types: a mover infected in a complex enters its other complex either
# through its household (type H, infecting k of h-1 housemates there) or
# through its workplace (type W, k of w-1 colleagues); k = 0 spawns nothing.
def n_fine_types(params: ModelParams) -> int:
    return (params.h - 1) + (params.w - 1)


def fine_index(params: ModelParams, y: str, k: int) -> int:
    """Flat index of fine type (y, k), k >= 1."""
    if y == "H":
        if not 1 <= k <= params.h - 1:
            raise ConfigError("household fine type k out of range")
        return k - 1
    if not 1 <= k <= params.w - 1:
        raise ConfigError("workplace fine type k out of range")
    return (params.h - 1) + (k - 1)


def fine_type_probs(params: ModelParams):
    """Marginal fine-type probabilities of an infected mover.

    p_h[i-1] is the probability that a mover entering its other complex via
    its household infects exactly i of its h-1 housemates, averaged over its
    own infectious period; analogously p_w with w-1 and the workplace rate.
    Computed in closed form via a binomial expansion in Laplace transforms.
    """
    ip = params.infectious_period

    def probs(count, rate):
        out = np.empty(count)
        for i in range(1, count + 1):
            signs = np.array([(-1) ** r * comb(i, r) for r in range(i + 1)])
            nus = rate * (count - i + np.arange(i + 1))
            out[i - 1] = comb(count, i) * float(signs @ ip.laplace(nus))
        return out

    return (probs(params.h - 1, params.beta_h_pair),
            probs(params.w - 1, params.beta_w_pair))
