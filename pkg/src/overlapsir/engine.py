"""Vectorized percolation engine for epidemics within a single complex.

Complexes are small (at most 2w individuals), so the engine materialises the
full directed edge matrix for a batch of independent replicas and finds the
seed's out-component (clump mode) or in-component (susceptibility mode) by
repeated boolean matrix products.  Edge u -> v is present with probability
1 - exp(-rate(u, v) * I_u), so all edges out of u share u's infectious period
and edges out of distinct individuals are independent.

Seed handling:
  * unconditioned clump runs draw the seed's period and Bernoulli edges like
    any other member;
  * constrained clump runs ("exactly l" for H/W seeds, "(j, l)" for R seeds)
    force the seed's contacts onto uniform subsets of the eligible partners
    and never draw the seed's period (the within-complex outcome is
    conditionally independent of it given the contact counts);
  * susceptibility runs never draw the seed's period either, since only
    edges pointing at the seed matter.

RNG consumption order is fixed: periods, forced-contact selectors, edge
uniforms, fine-type binomials.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ModelParams, ConfigError
from .structure import SeededComplexStructure, rate_matrix, fine_index, n_fine_types


@dataclass(frozen=True)
class ComplexBatch:
    """Outcomes of a batch of within-complex epidemics on one structure.

    group_counts excludes the seed from its own group.  severity is the sum
    of infectious periods over the infected, seed excluded.  seed_period is
    populated only for unconditioned clump runs; fine counts type-(Y, k)
    movers among the infected (k >= 1).
    """

    structure: SeededComplexStructure
    group_counts: np.ndarray          # (n, G) int16
    severity: np.ndarray              # (n,) float
    seed_period: np.ndarray | None
    fine: np.ndarray | None           # (n, h-1 + w-1) int16

    def coarse(self) -> np.ndarray:
        """(n, 3) columns (z_r, z_h, z_w): infected remainers, movers-in, movers-out."""
        d = self.structure.d
        zr = self.group_counts[:, 0:2 * d:2].sum(axis=1)
        zw = self.group_counts[:, 1:2 * d:2].sum(axis=1)
        zh = self.group_counts[:, 2 * d]
        return np.column_stack([zr, zh, zw])


def _node_layout(structure: SeededComplexStructure):
    sizes = structure.sizes
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    group_of = np.repeat(np.arange(len(sizes)), sizes)
    seed_node = int(offsets[structure.seed_group])
    return offsets, group_of, seed_node


def _pools(structure: SeededComplexStructure, offsets, seed_node):
    """Household and workplace partner node lists of the seed."""
    d = structure.d

    def nodes_of(groups):
        out = []
        for g in groups:
            out.extend(range(offsets[g], offsets[g + 1]))
        return [u for u in out if u != seed_node]

    household = nodes_of([0, 1])
    workplace = nodes_of(list(range(0, 2 * d, 2)) + [2 * d])
    return np.array(household), np.array(workplace)


def _validate_constraint(structure, constraint):
    st = structure.seed_type
    if constraint is None:
        return
    kind = constraint[0]
    if kind == "l":
        if st not in ("H", "W"):
            raise ConfigError("exactly-l constraint requires an H or W seed")
        limit = structure.h - 1 if st == "H" else structure.d * structure.h - 1
        if not 0 <= constraint[1] <= limit:
            raise ConfigError(f"l={constraint[1]} exceeds the {limit} eligible partners")
    elif kind == "jl":
        if st != "R":
            raise ConfigError("(j, l) constraint requires an R seed")
        j, l = constraint[1], constraint[2]
        if not 0 <= j <= structure.h - 1:
            raise ConfigError(f"j={j} exceeds the {structure.h - 1} housemates")
        if not 0 <= l <= structure.d * structure.h - 1:
            raise ConfigError(f"l={l} exceeds the workplace partner count")
    else:
        raise ConfigError(f"unknown constraint {constraint!r}")


def _choose(rng, pool, count, n_rows):
    """Uniform `count`-subsets of pool, one per row; returns a boolean mask over nodes."""
    if count == 0 or pool.size == 0:
        return None
    u = rng.random((n_rows, pool.size))
    picked = np.argpartition(u, count - 1, axis=1)[:, :count]
    return pool[picked]


def run_complex_batch(structure: SeededComplexStructure, params: ModelParams,
                      rng: np.random.Generator, n_runs: int, *,
                      mode: str = "clump", constraint=None,
                      want_fine: bool = False,
                      chunk_budget: int = 4_000_000) -> ComplexBatch:
    """Simulate n_runs independent within-complex epidemics.

    mode "clump" explores forward from the seed (optionally with a forced
    seed-contact constraint); mode "susset" collects the seed's in-component
    and accepts no constraint.
    """
    if mode not in ("clump", "susset"):
        raise ConfigError(f"unknown mode {mode!r}")
    if mode == "susset" and constraint is not None:
        raise ConfigError("susceptibility runs take no seed constraint")
    _validate_constraint(structure, constraint)

    ip = params.infectious_period
    offsets, group_of, seed_node = _node_layout(structure)
    T = structure.total
    G = structure.n_groups
    rates = rate_matrix(structure.h, structure.d,
                        params.beta_h_pair, params.beta_w_pair)
    rate_nodes = rates[np.ix_(group_of, group_of)].copy()
    np.fill_diagonal(rate_nodes, 0.0)
    unconditioned_clump = mode == "clump" and constraint is None
    hh_pool, wp_pool = _pools(structure, offsets, seed_node)

    counts = np.empty((n_runs, G), dtype=np.int16)
    severity = np.empty(n_runs, dtype=float)
    seed_period = np.empty(n_runs, dtype=float) if unconditioned_clump else None
    fine = np.zeros((n_runs, n_fine_types(params)), dtype=np.int16) if want_fine else None

    chunk = max(1, min(n_runs, chunk_budget // (T * T)))
    movers_in_lo, movers_in_hi = int(offsets[2 * structure.d]), T
    for start in range(0, n_runs, chunk):
        B = min(chunk, n_runs - start)
        sl = slice(start, start + B)

        I = np.zeros((B, T))
        if unconditioned_clump:
            I[:] = ip.sample(rng, (B, T))
        else:
            cols = [u for u in range(T) if u != seed_node]
            I[:, cols] = ip.sample(rng, (B, T - 1))

        init = np.zeros((B, T), dtype=bool)
        init[:, seed_node] = True
        if constraint is not None:
            if constraint[0] == "l":
                pool = hh_pool if structure.seed_type == "H" else wp_pool
                picked = _choose(rng, pool, constraint[1], B)
                if picked is not None:
                    init[np.arange(B)[:, None], picked] = True
            else:
                _, j, l = constraint
                for pool, cnt in ((hh_pool, j), (wp_pool, l)):
                    picked = _choose(rng, pool, cnt, B)
                    if picked is not None:
                        init[np.arange(B)[:, None], picked] = True

        edges = rng.random((B, T, T)) < -np.expm1(-rate_nodes[None] * I[:, :, None])
        if not unconditioned_clump:
            edges[:, seed_node, :] = False

        if mode == "clump":
            reach = init
            active = init.copy()
            eu = edges.view(np.uint8)
            while active.any():
                hits = (np.matmul(active[:, None, :].astype(np.uint8), eu)
                        .squeeze(1) > 0)
                active = hits & ~reach
                reach |= active
        else:
            reach = init
            active = init.copy()
            eu = edges.view(np.uint8)
            while active.any():
                hits = (np.matmul(eu, active[:, :, None].astype(np.uint8))
                        .squeeze(2) > 0)
                active = hits & ~reach
                reach |= active

        severity[sl] = (I * reach).sum(axis=1) - I[:, seed_node]
        if unconditioned_clump:
            seed_period[sl] = I[:, seed_node]
        for g in range(G):
            c = reach[:, offsets[g]:offsets[g + 1]].sum(axis=1)
            if g == structure.seed_group:
                c = c - 1
            counts[sl, g] = c

        if want_fine:
            # movers-in become household entrants of their other complex
            mask_h = reach[:, movers_in_lo:movers_in_hi].copy()
            if structure.seed_group == 2 * structure.d:
                mask_h[:, 0] = False
            rows, cols = np.nonzero(mask_h)
            if rows.size:
                iv = I[rows, movers_in_lo + cols]
                ks = rng.binomial(structure.h - 1,
                                  -np.expm1(-params.beta_h_pair * iv))
                keep = ks >= 1
                np.add.at(fine, (start + rows[keep], ks[keep] - 1), 1)
            # movers-out become workplace entrants of their other complex
            w = structure.d * structure.h
            for g in range(1, 2 * structure.d, 2):
                mask_w = reach[:, offsets[g]:offsets[g + 1]].copy()
                if g == structure.seed_group:
                    mask_w[:, 0] = False
                rows, cols = np.nonzero(mask_w)
                if not rows.size:
                    continue
                iv = I[rows, offsets[g] + cols]
                ks = rng.binomial(w - 1, -np.expm1(-params.beta_w_pair * iv))
                keep = ks >= 1
                np.add.at(fine, (start + rows[keep],
                                 (structure.h - 1) + ks[keep] - 1), 1)

    return ComplexBatch(structure=structure, group_counts=counts,
                        severity=severity, seed_period=seed_period, fine=fine)


@dataclass(frozen=True)
class WithinComplexOutcome:
    """Result of a single within-complex epidemic."""

    structure: SeededComplexStructure
    group_counts: np.ndarray
    severity: float
    coarse: tuple                  # (z_r, z_h, z_w)
    fine: np.ndarray
    seed_period: float | None


def run_within_complex(structure: SeededComplexStructure, params: ModelParams,
                       rng: np.random.Generator,
                       constraint=None) -> WithinComplexOutcome:
    """One clump-side epidemic; see run_complex_batch for constraint forms."""
    batch = run_complex_batch(structure, params, rng, 1,
                              constraint=constraint, want_fine=True)
    return WithinComplexOutcome(
        structure=structure, group_counts=batch.group_counts[0],
        severity=float(batch.severity[0]), coarse=tuple(batch.coarse()[0]),
        fine=batch.fine[0],
        seed_period=None if batch.seed_period is None else float(batch.seed_period[0]))


def susset_within_complex(structure: SeededComplexStructure, params: ModelParams,
                          rng: np.random.Generator):
    """Typed census of the seed's within-complex susceptibility set.

    Returns (z_r, z_h, z_w); the seed's own infectious period is never drawn.
    """
    batch = run_complex_batch(structure, params, rng, 1, mode="susset")
    return tuple(batch.coarse()[0])
