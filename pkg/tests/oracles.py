"""Independent oracles used to certify the engines.

These deliberately avoid the production code paths: the enumeration oracle
walks every directed-edge subset of a small complex, the quadrature oracle
integrates the exponential-period edge law per source node, and the coupled
simulator pre-draws per-pair thresholds so that infection sets are monotone
in the contact rates.
"""
import itertools
from math import comb, exp

import numpy as np
from scipy.integrate import quad

from overlapsir.structure import rate_matrix


def node_setup(structure, params):
    sizes = structure.sizes
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    group_of = np.repeat(np.arange(len(sizes)), sizes)
    seed = int(offsets[structure.seed_group])
    rates = rate_matrix(structure.h, structure.d,
                        params.beta_h_pair, params.beta_w_pair)
    pair_rate = rates[np.ix_(group_of, group_of)]
    np.fill_diagonal(pair_rate, 0.0)
    return offsets, group_of, seed, pair_rate


def census(structure, offsets, seed, reached):
    counts = []
    for g in range(structure.n_groups):
        c = sum(1 for u in range(offsets[g], offsets[g + 1]) if u in reached)
        if g == structure.seed_group:
            c -= 1
        counts.append(c)
    return tuple(counts)


def _reach(nodes, edges, start):
    reached = set(start)
    frontier = list(start)
    adj = {u: [] for u in nodes}
    for u, v in edges:
        adj[u].append(v)
    while frontier:
        u = frontier.pop()
        for v in adj[u]:
            if v not in reached:
                reached.add(v)
                frontier.append(v)
    return reached


def _seed_target_sets(structure, params, offsets, seed, constraint):
    """All (probability, forced target set) choices of the seed's contacts."""
    d = structure.d
    hh_pool = [u for g in (0, 1) for u in range(offsets[g], offsets[g + 1])
               if u != seed]
    wp_groups = list(range(0, 2 * d, 2)) + [2 * d]
    wp_pool = [u for g in wp_groups for u in range(offsets[g], offsets[g + 1])
               if u != seed]
    if constraint is None:
        return None
    if constraint[0] == "l":
        pool = hh_pool if structure.seed_type == "H" else wp_pool
        l = constraint[1]
        total = comb(len(pool), l)
        return [(1.0 / total, frozenset(c))
                for c in itertools.combinations(pool, l)]
    _, j, l = constraint
    out = []
    wh = 1.0 / comb(len(hh_pool), j)
    ww = 1.0 / comb(len(wp_pool), l)
    for ch in itertools.combinations(hh_pool, j):
        for cw in itertools.combinations(wp_pool, l):
            out.append((wh * ww, frozenset(ch) | frozenset(cw)))
    return out


def enumerate_census_pmf(structure, params, mode="clump", constraint=None):
    """Exact per-group census PMF by summing over every edge pattern.

    Constant infectious period only.  Edges with zero rate are never present
    and are excluded from the enumeration, so complexes of up to ~5 members
    stay cheap.
    """
    assert params.infectious_period.is_constant
    offsets, group_of, seed, pair_rate = node_setup(structure, params)
    T = structure.total
    nodes = list(range(T))
    choices = _seed_target_sets(structure, params, offsets, seed, constraint)
    drop_seed_row = not (mode == "clump" and constraint is None)

    pairs = [(u, v) for u in nodes for v in nodes
             if pair_rate[u, v] > 0 and not (drop_seed_row and u == seed)
             and not (mode == "susset" and u == seed)]
    probs = [1.0 - exp(-pair_rate[u, v]) for u, v in pairs]

    pmf = {}
    for bits in itertools.product((0, 1), repeat=len(pairs)):
        p_edges = 1.0
        edges = []
        for bit, (u, v), pe in zip(bits, pairs, probs):
            p_edges *= pe if bit else (1.0 - pe)
            if bit:
                edges.append((u, v))
        if mode == "susset":
            rev = [(v, u) for u, v in edges]
            reached = _reach(nodes, rev, [seed])
            key = census(structure, offsets, seed, reached)
            pmf[key] = pmf.get(key, 0.0) + p_edges
            continue
        if choices is None:
            reached = _reach(nodes, edges, [seed])
            key = census(structure, offsets, seed, reached)
            pmf[key] = pmf.get(key, 0.0) + p_edges
        else:
            for w, targets in choices:
                reached = _reach(nodes, edges, [seed] + list(targets))
                key = census(structure, offsets, seed, reached)
                pmf[key] = pmf.get(key, 0.0) + p_edges * w
    return pmf


def quadrature_susset_pmf(structure, params):
    """Susceptibility census PMF for exponential periods on tiny complexes.

    The seed's in-component depends only on edges out of the other members;
    all edges out of u share u's period, so the probability of a full edge
    pattern factorises into one 1-d integral per source node.
    """
    assert params.infectious_period.law == "exponential"
    offsets, group_of, seed, pair_rate = node_setup(structure, params)
    T = structure.total
    assert T <= 4
    nodes = list(range(T))
    sources = [u for u in nodes if u != seed]
    out_pairs = {u: [v for v in nodes if pair_rate[u, v] > 0] for u in sources}

    def source_prob(u, present):
        def integrand(i):
            val = np.exp(-i)
            for v in out_pairs[u]:
                p = 1.0 - np.exp(-pair_rate[u, v] * i)
                val *= p if v in present else (1.0 - p)
            return val
        return quad(integrand, 0.0, np.inf, limit=200)[0]

    pmf = {}
    pair_lists = [[(u, v) for v in out_pairs[u]] for u in sources]
    flat = [p for lst in pair_lists for p in lst]
    for bits in itertools.product((0, 1), repeat=len(flat)):
        edges = [p for bit, p in zip(bits, flat) if bit]
        present_by_u = {u: set() for u in sources}
        for u, v in edges:
            present_by_u[u].add(v)
        prob = 1.0
        for u in sources:
            prob *= source_prob(u, present_by_u[u])
        rev = [(v, u) for u, v in edges]
        reached = _reach(nodes, rev, [seed])
        key = census(structure, offsets, seed, reached)
        pmf[key] = pmf.get(key, 0.0) + prob
    return pmf


def total_variation(pmf_a: dict, pmf_b: dict) -> float:
    keys = set(pmf_a) | set(pmf_b)
    return 0.5 * sum(abs(pmf_a.get(k, 0.0) - pmf_b.get(k, 0.0)) for k in keys)


def counts_to_pmf(rows) -> dict:
    rows = np.asarray(rows)
    uniq, counts = np.unique(rows, axis=0, return_counts=True)
    return {tuple(int(v) for v in k): c / rows.shape[0]
            for k, c in zip(uniq, counts)}


def coupled_thresholds(pop, params_max, rng):
    """Pre-draw everything so epidemics are monotone in the contact rates.

    Returns a closure mapping (beta_h, beta_w, beta_g) to the infected set
    from a fixed initial case: shared periods, shared per-directed-pair
    uniforms for household and workplace edges, and a shared global contact
    list drawn at the maximal rate and thinned per call.
    """
    n = pop.n
    I = np.atleast_1d(np.asarray(params_max.infectious_period.sample(rng, n),
                                 dtype=float))
    u_house = rng.random((n, pop.h))
    u_work = rng.random((n, pop.w))
    counts = rng.poisson(params_max.beta_g * I)
    glob = [(rng.integers(0, n, size=c), rng.random(c)) for c in counts]
    initial = int(rng.integers(n))

    hh = pop.household_members[pop.household]
    wp = pop.workplace_members[pop.final_workplace]
    all_ids = np.arange(n)

    def infected_set(beta_h, beta_w, beta_g):
        bh = beta_h / (pop.h - 1)
        bw = beta_w / (pop.w - 1)
        shares = pop.final_workplace[hh] == pop.final_workplace[:, None]
        p_h = 1.0 - np.exp(-(bh + bw * shares) * I[:, None])
        e_h = (u_house < p_h) & (hh != all_ids[:, None])
        same = pop.household[wp] == pop.household[:, None]
        e_w = (u_work < (1.0 - np.exp(-bw * I[:, None]))) & ~same
        frac = beta_g / params_max.beta_g if params_max.beta_g else 0.0
        infected = np.zeros(n, dtype=bool)
        infected[initial] = True
        frontier = [initial]
        while frontier:
            u = frontier.pop()
            targets = list(hh[u][e_h[u]]) + list(wp[u][e_w[u]])
            g_targets, g_thin = glob[u]
            targets += list(g_targets[g_thin < frac])
            for v in targets:
                if not infected[v]:
                    infected[v] = True
                    frontier.append(v)
        return infected

    return infected_set
