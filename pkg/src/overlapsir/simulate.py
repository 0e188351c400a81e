"""Final-outcome epidemic simulation on a realized population.

The simulator never tracks time.  When an individual u is first infected it
draws its infectious period I_u and then, in one shot, all of its potential
onward transmissions: a directed edge to each household member with
probability 1 - exp(-beta_h' I_u), to each workplace member with probability
1 - exp(-beta_w' I_u) (combined rate for members sharing both groups), plus a
Poisson(beta_g I_u) number of global contacts aimed uniformly at the whole
population, the infector included.  Breadth-first exploration of these edges
yields the final outcome with the exact law of the continuous-time model, at
a cost proportional to the edges actually explored.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .params import ModelParams, SeedSpec, STREAM_RUN
from .population import Population, generate


@dataclass(frozen=True)
class Outcome:
    """Final outcome of a single epidemic."""

    final_size: int
    severity: float          # sum of infectious periods over the infected
    initial: int
    infected: np.ndarray     # (n,) bool

    def __post_init__(self):
        assert 1 <= self.final_size <= self.infected.size
        assert self.severity > 0


def simulate_final(pop: Population, params: ModelParams,
                   rng: np.random.Generator, initial: int) -> Outcome:
    """Run one epidemic from `initial`; deterministic given (pop, params, rng state)."""
    n = pop.n
    ip = params.infectious_period
    bh, bw, bg = params.beta_h_pair, params.beta_w_pair, params.beta_g
    hh_id, wp_id = pop.household, pop.final_workplace
    hh_members, wp_members = pop.household_members, pop.workplace_members

    infected = np.zeros(n, dtype=bool)
    infected[initial] = True
    frontier = np.array([initial], dtype=np.int64)
    severity = 0.0
    while frontier.size:
        I = np.atleast_1d(np.asarray(ip.sample(rng, frontier.size), dtype=float))
        severity += float(I.sum())
        # household edges; pairs sharing the final workplace get the combined rate
        hh = hh_members[hh_id[frontier]]
        shares_wp = wp_id[hh] == wp_id[frontier, None]
        p = -np.expm1(-(bh + bw * shares_wp) * I[:, None])
        hit_h = (rng.random(hh.shape) < p) & (hh != frontier[:, None])
        # workplace edges, skipping household co-members (handled above)
        wp = wp_members[wp_id[frontier]]
        same_hh = hh_id[wp] == hh_id[frontier, None]
        hit_w = (rng.random(wp.shape) < -np.expm1(-bw * I[:, None])) & ~same_hh
        # global contacts, uniform over everyone including the infector
        targets = [hh[hit_h], wp[hit_w]]
        if bg > 0:
            n_glob = int(rng.poisson(bg * I).sum())
            if n_glob:
                targets.append(rng.integers(0, n, size=n_glob))
        t = np.concatenate(targets)
        t = np.unique(t[~infected[t]])
        infected[t] = True
        frontier = t
    return Outcome(final_size=int(infected.sum()), severity=severity,
                   initial=int(initial), infected=infected)


@dataclass(frozen=True)
class BatchSummary:
    """Aggregated batch results split at a minor/major cutoff."""

    final_sizes: np.ndarray
    n: int
    cutoff: int
    n_minor: int
    n_major: int
    rho_hat: float
    rho_ci: tuple
    z_hat: float | None        # None when no major outbreak was observed
    z_ci: tuple | None

    @property
    def n_runs(self) -> int:
        return self.n_minor + self.n_major


def default_cutoff(n: int) -> int:
    return int(math.ceil(math.log(n)))


def estimate_rho_z(final_sizes, n: int, cutoff: int) -> BatchSummary:
    """Major-outbreak probability and conditional final fraction with 95% CIs."""
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    sizes = np.asarray(final_sizes, dtype=np.int64)
    n_runs = sizes.size
    major = sizes >= cutoff
    n_major = int(major.sum())
    rho = n_major / n_runs
    half = 1.96 * math.sqrt(rho * (1.0 - rho) / n_runs)
    if n_major:
        fr = sizes[major] / n
        z = float(fr.mean())
        sd = float(fr.std(ddof=1)) if n_major > 1 else 0.0
        zhalf = 1.96 * sd / math.sqrt(n_major)
        z_ci = (z - zhalf, z + zhalf)
    else:
        z, z_ci = None, None
    return BatchSummary(final_sizes=sizes, n=n, cutoff=cutoff,
                        n_minor=n_runs - n_major, n_major=n_major,
                        rho_hat=rho, rho_ci=(rho - half, rho + half),
                        z_hat=z, z_ci=z_ci)


def _one_run(params: ModelParams, seed: SeedSpec, k: int,
             fresh_network: bool, initial, shared_pop):
    """Run k on stream id k; a fresh network is drawn inside the run's stream."""
    rng = seed.rng(STREAM_RUN, k)
    pop = generate(params, rng) if fresh_network else shared_pop
    init = int(rng.integers(pop.n)) if initial is None else int(initial)
    out = simulate_final(pop, params, rng, init)
    return out.final_size, out.severity, init


def _run_chunk(args):
    params, seed, ks, fresh_network, initial, shared_pop = args
    return [_one_run(params, seed, k, fresh_network, initial, shared_pop)
            for k in ks]


def run_batch(params: ModelParams, n_sims: int, seed: SeedSpec, *,
              cutoff: int | None = None, fresh_network: bool = True,
              initial: int | None = None, workers: int = 1,
              run_offset: int = 0):
    """Simulate n_sims independent epidemics and summarise them.

    Run k (k = run_offset .. run_offset + n_sims - 1) uses stream id k, so
    results are bit-identical for any worker count and aggregation order.
    By default each run draws a fresh population; fresh_network=False fixes
    one network (drawn from the population stream) across all runs.
    Returns (BatchSummary, records) with one (run, final_size, severity,
    initial, major) tuple per run.
    """
    if n_sims < 1:
        raise ValueError("n_sims must be >= 1")
    shared_pop = None if fresh_network else generate(params, seed)
    ks = list(range(run_offset, run_offset + n_sims))
    if workers > 1:
        chunks = [ks[i::workers] for i in range(workers)]
        results: dict[int, tuple] = {}
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for chunk, rows in zip(chunks, pool.map(_run_chunk, [
                    (params, seed, chunk, fresh_network, initial, shared_pop)
                    for chunk in chunks])):
                results.update(zip(chunk, rows))
        rows = [results[k] for k in ks]
    else:
        rows = [_one_run(params, seed, k, fresh_network, initial, shared_pop)
                for k in ks]
    sizes = np.array([r[0] for r in rows], dtype=np.int64)
    cut = default_cutoff(params.n) if cutoff is None else cutoff
    summary = estimate_rho_z(sizes, params.n, cut)
    records = [(k, size, sev, init, int(size >= cut))
               for k, (size, sev, init) in zip(ks, rows)]
    return summary, records


def local_contact_graph(pop: Population, params: ModelParams,
                        rng: np.random.Generator):
    """Draw one realization of the directed local-contact graph.

    Every individual draws its own infectious period and its potential
    household/workplace edges; global contacts are ignored.  Returns
    (sources, targets) edge arrays.
    """
    n = pop.n
    ip = params.infectious_period
    bh, bw = params.beta_h_pair, params.beta_w_pair
    I = np.atleast_1d(np.asarray(ip.sample(rng, n), dtype=float))
    all_ids = np.arange(n)

    hh = pop.household_members[pop.household]          # (n, h)
    shares_wp = pop.final_workplace[hh] == pop.final_workplace[:, None]
    p = -np.expm1(-(bh + bw * shares_wp) * I[:, None])
    hit_h = (rng.random(hh.shape) < p) & (hh != all_ids[:, None])

    wp = pop.workplace_members[pop.final_workplace]    # (n, w)
    same_hh = pop.household[wp] == pop.household[:, None]
    hit_w = (rng.random(wp.shape) < -np.expm1(-bw * I[:, None])) & ~same_hh

    src = np.concatenate([np.repeat(all_ids, hit_h.sum(axis=1)),
                          np.repeat(all_ids, hit_w.sum(axis=1))])
    tgt = np.concatenate([hh[hit_h], wp[hit_w]])
    return src, tgt


def _component_sizes(n: int, heads, nexts) -> np.ndarray:
    """Reachable-set size from every node over a flat adjacency list."""
    sizes = np.empty(n, dtype=np.int64)
    stamp = np.full(n, -1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    for i in range(n):
        stamp[i] = i
        stack[0] = i
        top, count = 1, 1
        while top:
            top -= 1
            u = stack[top]
            e = heads[u]
            while e != -1:
                v = nexts[e][1]
                if stamp[v] != i:
                    stamp[v] = i
                    stack[top] = v
                    top += 1
                    count += 1
                e = nexts[e][0]
        sizes[i] = count
    return sizes


def _adjacency(n, src, tgt):
    heads = np.full(n, -1, dtype=np.int64)
    nexts = []
    for s, t in zip(src, tgt):
        nexts.append((heads[s], t))
        heads[s] = len(nexts) - 1
    return heads, nexts


def clump_susset_census(pop: Population, params: ModelParams,
                        rng: np.random.Generator):
    """Clump and susceptibility-set sizes of every individual on one graph.

    The clump of i is its out-component (everyone i would infect through
    local chains), the susceptibility set its in-component.  On any single
    realization the two size vectors have equal sums: both count ordered
    reachable pairs.
    """
    src, tgt = local_contact_graph(pop, params, rng)
    heads_f, nexts_f = _adjacency(pop.n, src, tgt)
    heads_b, nexts_b = _adjacency(pop.n, tgt, src)
    clump = _component_sizes(pop.n, heads_f, nexts_f)
    susset = _component_sizes(pop.n, heads_b, nexts_b)
    return clump, susset
