"""Exact final-state distributions for constant infectious periods.

With a constant infectious period the within-complex contact graph has
independent Bernoulli edges, so the epidemic is of multitype Reed-Frost type
and the joint distribution of the per-group final counts solves a triangular
linear system over final-state vectors ordered coordinatewise.  The same
machinery covers the seed's susceptibility-set census: reversing every edge
leaves the law of the graph unchanged when the period is constant.

Non-constant periods are rejected here and routed to Monte Carlo instead.
"""
from __future__ import annotations

import itertools
from math import comb

import numpy as np

from .params import ModelParams, ConfigError
from .structure import (SeededComplexStructure, rate_matrix,
                        enumerate_structures)


def final_state_pmf(N, a, logq) -> np.ndarray:
    """Joint PMF of the numbers of initial susceptibles ultimately infected.

    N[g] initial susceptibles and a[g] initial infectives per group;
    logq[g_src, g_tgt] is the log of the probability that one group-g_src
    infective fails to contact one given group-g_tgt susceptible.  Returns an
    array P of shape N+1 with P[k] = P(final extra infections = k); the mass
    sums to 1 up to roundoff.

    The defining identity, for every k <= N coordinatewise, is

        sum_{j <= k} prod_g C(N_g - j_g, k_g - j_g) P(j) / esc(j, k)
            = prod_g C(N_g, k_g),

    where esc(j, k) = prod_g q_g(a + j)^(N_g - k_g) is the probability that
    k's leftover susceptibles escape all a + j infectives.  Solving in
    coordinatewise-increasing order is triangular.
    """
    N = np.asarray(N, dtype=np.int64)
    a = np.asarray(a, dtype=np.int64)
    logq = np.asarray(logq, dtype=float)
    G = N.size
    shape = tuple(int(n) + 1 for n in N)
    P = np.zeros(shape)
    # pressure[j, g] = sum_{g'} (a_{g'} + j_{g'}) logq[g', g] over the full box
    J = np.indices(shape).reshape(G, -1).T
    pressure = ((J + a) @ logq).reshape(shape + (G,))
    binoms = [np.array([[comb(int(N[g]) - j, k - j) if j <= k else 0
                         for j in range(int(N[g]) + 1)]
                        for k in range(int(N[g]) + 1)], dtype=float)
              for g in range(G)]
    for k in itertools.product(*(range(s) for s in shape)):
        sl = tuple(slice(0, kg + 1) for kg in k)
        leftover = (N - np.asarray(k)).astype(float)
        esc = np.exp(pressure[sl] @ leftover)
        c = binoms[0][k[0], :k[0] + 1]
        for g in range(1, G):
            c = np.multiply.outer(c, binoms[g][k[g], :k[g] + 1])
        rhs = 1.0
        for g in range(G):
            rhs *= binoms[g][k[g], 0]     # C(N_g, k_g)
        acc = float(np.sum(P[sl] * c / esc))
        P[k] = (rhs - acc) * esc[k]
    return P


def _require_constant(params: ModelParams):
    if not params.infectious_period.is_constant:
        raise ConfigError("exact final-state distributions require a constant "
                          "infectious period; use the Monte Carlo route instead")


def _mvh(pools, total):
    """Multivariate hypergeometric allocations: (prob, counts) over pools."""
    sizes = [e for _, e in pools]
    denom = comb(sum(sizes), total)
    out = []
    for c in itertools.product(*(range(min(e, total) + 1) for e in sizes)):
        if sum(c) != total:
            continue
        num = 1
        for ci, ei in zip(c, sizes):
            num *= comb(ei, ci)
        if num:
            out.append((num / denom, c))
    return out


def _seed_allocations(structure: SeededComplexStructure, constraint):
    """Enumerate (prob, non-seed initial infectives per group).

    For the unconditioned seed the caller treats the seed itself as the only
    initial infective; here the allocation is the empty one.  For constrained
    seeds the forced contacts become the initial infectives and the seed is
    removed from the population entirely.
    """
    G = structure.n_groups
    d = structure.d
    sizes = list(structure.sizes)
    sg = structure.seed_group
    if constraint is None:
        return [(1.0, tuple([0] * G))]

    def eligible(group):
        return sizes[group] - (1 if group == sg else 0)

    if constraint[0] == "l":
        l = constraint[1]
        if structure.seed_type == "H":
            pool_groups = [0, 1]
        else:
            pool_groups = list(range(0, 2 * d, 2)) + [2 * d]
        pools = [(g, eligible(g)) for g in pool_groups]
        out = []
        for p, c in _mvh(pools, l):
            vec = [0] * G
            for (g, _), ci in zip(pools, c):
                vec[g] = ci
            out.append((p, tuple(vec)))
        return out

    # R seed contacting j housemates and l workplace colleagues; the two
    # uniform subsets may overlap on group-1 members (index 0), who share
    # both structures with the seed
    _, j, l = constraint
    hh_pools = [(0, eligible(0)), (1, eligible(1))]
    wp_groups = list(range(0, 2 * d, 2)) + [2 * d]
    wp_pools = [(g, eligible(g)) for g in wp_groups]
    out = []
    for p1, ch in _mvh(hh_pools, j):
        for p2, cw in _mvh(wp_pools, l):
            e0 = eligible(0)
            ch0, cw0 = ch[0], cw[0]
            vmin, vmax = max(0, ch0 + cw0 - e0), min(ch0, cw0)
            for v in range(vmin, vmax + 1):
                pv = (comb(ch0, v) * comb(e0 - ch0, cw0 - v)
                      / comb(e0, cw0)) if cw0 else (1.0 if v == 0 else 0.0)
                vec = [0] * G
                vec[0] = ch0 + cw0 - v
                vec[1] = ch[1]
                for (g, _), ci in zip(wp_pools[1:], cw[1:]):
                    vec[g] = ci
                out.append((p1 * p2 * pv, tuple(vec)))
    return out


def exact_outcome_pmf(structure: SeededComplexStructure, params: ModelParams,
                      constraint=None) -> dict:
    """Exact PMF over per-group infected counts (seed excluded), constant period.

    constraint is None, ("l", l) for H/W seeds, or ("jl", j, l) for R seeds,
    with the same meaning as in the Monte Carlo engine.
    """
    _require_constant(params)
    rates = rate_matrix(structure.h, structure.d,
                        params.beta_h_pair, params.beta_w_pair)
    logq = -rates
    sizes = np.asarray(structure.sizes, dtype=np.int64)
    seedvec = np.zeros(structure.n_groups, dtype=np.int64)
    seedvec[structure.seed_group] = 1

    pmf: dict[tuple, float] = {}
    for prob, init in _seed_allocations(structure, constraint):
        init = np.asarray(init, dtype=np.int64)
        if constraint is None:
            a = seedvec
        else:
            a = init
        N = sizes - seedvec - init
        P = final_state_pmf(N, a, logq)
        for k in itertools.product(*(range(s + 1) for s in N)):
            p = P[k]
            if p <= 0.0:
                continue
            total = tuple(np.asarray(k) + init)
            pmf[total] = pmf.get(total, 0.0) + prob * p
    return pmf


def coarse_triple(structure: SeededComplexStructure, counts) -> tuple:
    """(z_r, z_h, z_w) from a per-group count vector."""
    d = structure.d
    zr = sum(counts[0:2 * d:2])
    zw = sum(counts[1:2 * d:2])
    return (zr, counts[2 * d], zw)


def exact_coarse_pmf(params: ModelParams, seed_type: str,
                     constraint=None) -> dict:
    """Joint PMF of (z_r, z_h, z_w), mixed exactly over the structure law.

    With a constant period the clump-side and susceptibility-side censuses
    coincide in law (edge reversal), so one table serves both.
    """
    _require_constant(params)
    out: dict[tuple, float] = {}
    for weight, structure in enumerate_structures(params, seed_type):
        pmf = exact_outcome_pmf(structure, params, constraint)
        for counts, p in pmf.items():
            key = coarse_triple(structure, counts)
            out[key] = out.get(key, 0.0) + weight * p
    return out


def exact_cost(params: ModelParams, seed_type: str) -> float:
    """Work estimate for the exact route (sum over structures of box volume)."""
    total = 0.0
    for _, structure in enumerate_structures(params, seed_type):
        sizes = np.asarray(structure.sizes)
        sizes[structure.seed_group] -= 1
        total += float(np.prod((sizes + 1.0) * (sizes + 2.0) / 2.0))
    return total
