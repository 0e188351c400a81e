"""Reproducible experiments behind the simulate/analyze/figure pipelines.

Every experiment writes versioned CSVs (first line "#schema=v1", UTF-8, LF,
'.' decimals, fixed float formatting) plus a JSON manifest recording the
config snapshot, seed, flags and output hashes.  Replaying a manifest with
any worker count reproduces the CSV bytes exactly, because all randomness is
keyed by (seed, run index) and aggregation is order-independent.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import replace

import numpy as np

from . import analytics
from .params import ModelParams, SeedSpec, ConfigError, from_reparam
from .periods import InfectiousPeriod
from .population import generate, write_population_csv
from .simulate import run_batch, estimate_rho_z, clump_susset_census, default_cutoff
from .tables import build_table_set, build_fine_libraries

SCHEMA = "#schema=v1"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf"
        return format(value, ".10g")
    return str(value)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(SCHEMA + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path, subcommand: str, config_snapshot: dict, flags: dict,
                   outputs: list, wall_clock: float, workers: int,
                   argv=None):
    manifest = {
        "schema": "v1",
        "subcommand": subcommand,
        "config": config_snapshot,
        "flags": flags,
        "argv": list(argv) if argv else None,
        "outputs": {os.path.basename(p): sha256_file(p) for p in outputs},
        "wall_clock_s": round(wall_clock, 3),
        "workers": workers,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def config_snapshot(params: ModelParams, seed: SeedSpec) -> dict:
    return {
        "h": params.h, "d": params.d, "theta": params.theta,
        "beta_h": params.beta_h, "beta_w": params.beta_w,
        "beta_g": params.beta_g,
        "infectious_period": params.infectious_period.spec(),
        "n": params.n, "seed": seed.base, "stream": seed.stream,
    }


SIM_HEADER = ("run", "n", "final_size", "severity", "initial", "major")


def simulate_experiment(params: ModelParams, seed: SeedSpec, n_sims: int,
                        out_path, *, cutoff=None, fresh_network=True,
                        workers=1, run_offset=0):
    summary, records = run_batch(params, n_sims, seed, cutoff=cutoff,
                                 fresh_network=fresh_network, workers=workers,
                                 run_offset=run_offset)
    rows = [(k, params.n, size, sev, init, major)
            for k, size, sev, init, major in records]
    write_csv(out_path, SIM_HEADER, rows)
    return summary


def run_until_majors(params: ModelParams, seed: SeedSpec, n_majors: int, *,
                     cutoff, workers=1, batch=None):
    """Simulate until n_majors major outbreaks have occurred.

    Runs are consumed in stream order, so the set of runs is a deterministic
    function of (params, seed, cutoff) regardless of batch or worker count.
    Returns the major-outbreak final sizes (exactly n_majors of them).
    """
    batch = batch or max(256, n_majors)
    majors = []
    offset = 0
    while len(majors) < n_majors:
        _, records = run_batch(params, batch, seed, cutoff=cutoff,
                               workers=workers, run_offset=offset)
        offset += batch
        majors.extend(size for _, size, _, _, major in records if major)
        if offset > 1000 * n_majors + 100_000:
            raise analytics.NonConvergence(
                "major outbreaks far rarer than expected; check the cutoff")
    return np.array(majors[:n_majors], dtype=np.int64)


def census_experiment(params: ModelParams, seed: SeedSpec, out_path):
    pop = generate(params, seed)
    clump, susset = clump_susset_census(pop, params, seed.rng(5))
    rows = [(i, int(clump[i]), int(susset[i])) for i in range(pop.n)]
    write_csv(out_path, ("individual", "clump_size", "susset_size"), rows)
    return clump, susset


def generate_experiment(params: ModelParams, seed: SeedSpec, out_path):
    pop = generate(params, seed)
    write_population_csv(pop, out_path)
    return pop


def tables_experiment(params: ModelParams, seed: SeedSpec, which: str,
                      n_mc: int, exact: str, out_path, cache_dir=None):
    from .tables import cache_key, cached
    if which in ("clump-coarse", "susset-coarse"):
        kind = "clump" if which.startswith("clump") else "susset"
        key = cache_key("tables", params.key(), kind, str(n_mc), str(seed),
                        exact)
        tables = cached(cache_dir, key,
                        lambda: build_table_set(params, kind, n_mc, seed, exact))
        rows = []
        for x in ("R", "H", "W"):
            if x not in tables.tables:
                continue
            t = tables.get(x)
            se = t.cell_se()
            for i in range(t.keys.shape[0]):
                zr, zh, zw = (int(v) for v in t.keys[i])
                rows.append((x, zr, zh, zw, float(t.probs[i]), float(se[i])))
        write_csv(out_path, ("seed_type", "z_r", "z_h", "z_w", "prob", "stderr"),
                  rows)
        return tables
    if which == "clump-fine":
        key = cache_key("fine", params.key(), str(n_mc), str(seed), "False")
        fine = cached(cache_dir, key,
                      lambda: build_fine_libraries(params, n_mc, seed))
        rows = []
        h = params.h
        for (x, l), lib in sorted(fine.libraries.items()):
            means = lib.fine.mean(axis=0)
            ses = lib.fine.std(axis=0, ddof=1) / math.sqrt(lib.n)
            for t in range(means.size):
                y, k = ("H", t + 1) if t < h - 1 else ("W", t - (h - 1) + 1)
                rows.append((x, l, y, k, float(means[t]), float(ses[t]),
                             float(lib.severity.mean())))
        write_csv(out_path, ("seed_type", "l", "y", "k", "count_mean",
                             "count_se", "severity_mean"), rows)
        return fine
    raise ConfigError(f"unknown table request {which!r}")


ANALYZE_HEADER = ("quantity", "value", "stderr", "residual")


def analyze_experiment(params: ModelParams, seed: SeedSpec, quantity: str,
                       n_mc: int, exact: str, out_path, *, n_mc_fine=None,
                       cache_dir=None, unprimed=False):
    report = analytics.analyze(params, n_mc=n_mc, seed=seed, exact=exact,
                               n_mc_fine=n_mc_fine, cache_dir=cache_dir,
                               unprimed_seed_rates=unprimed)
    wanted = {"rl": ["R_L"], "rstar": ["R_star"], "z": ["z"], "rho": ["rho"],
              "all": ["R_L", "R_star", "z", "rho", "xi"]}.get(quantity)
    if wanted is None:
        raise ConfigError(f"unknown quantity {quantity!r}")
    rows = []
    for q in wanted:
        value = getattr(report, q)
        se = {"R_L": report.R_L_se, "R_star": report.R_star_se}.get(q, math.nan)
        residual = report.z_residual if q in ("z", "rho") else math.nan
        rows.append((q, value, se, residual))
    write_csv(out_path, ANALYZE_HEADER, rows)
    return report


SWEEP_HEADER = ("theta", "d", "ip_law", "R_L", "R_star", "z", "rho",
                "residual", "n_mc")


def sweep_experiment(base: ModelParams, seed: SeedSpec, thetas, ds, laws,
                     n_mc: int, exact: str, out_path, *, n_mc_fine=None,
                     cache_dir=None, with_rho: bool = False):
    """z, rho and thresholds over a (theta, d, law) grid.

    rho is free when the period is constant (rho = z) and cheap when
    beta_g = 0; the general-period severity-transform route is run per grid
    point only when with_rho is set, and otherwise left as NaN.
    """
    rows = []
    for law in laws:
        ip = InfectiousPeriod.parse(law)
        for d in ds:
            for i, theta in enumerate(thetas):
                params = replace(base, d=int(d), theta=float(theta),
                                 infectious_period=ip, n=None)
                stream_seed = SeedSpec(seed.base,
                                       seed.stream + 1000 * (ds.index(d) + 1) + i)
                report = analytics.analyze(params, n_mc=n_mc, seed=stream_seed,
                                           exact=exact, n_mc_fine=n_mc_fine,
                                           cache_dir=cache_dir,
                                           skip_general_rho=not with_rho)
                rows.append((float(theta), int(d), ip.spec(), report.R_L,
                             report.R_star, report.z, report.rho,
                             report.z_residual, report.n_mc))
    write_csv(out_path, SWEEP_HEADER, rows)
    return rows


# Figure defaults: d=1, h=w=4, beta=3, pi_g=0.025, pi_h|gc=0.5, constant period
def figure_defaults(h=4, d=1, theta=0.4, n=1000) -> ModelParams:
    bh, bw, bg = from_reparam(3.0, 0.025, 0.5)
    return ModelParams(h=h, d=d, theta=theta, beta_h=bh, beta_w=bw, beta_g=bg,
                       n=n)


def figure1_experiment(out_dir, seed: SeedSpec, *, n_sims=10_000,
                       workers=1, params: ModelParams | None = None):
    """Four final-size histogram panels: subcritical large overlap, then
    decreasing n at smaller overlap."""
    os.makedirs(out_dir, exist_ok=True)
    base = params or figure_defaults()
    panels = [("fig1_theta0075_n1000.csv", 0.075, 1000),
              ("fig1_theta04_n1000.csv", 0.4, 1000),
              ("fig1_theta04_n600.csv", 0.4, 600),
              ("fig1_theta04_n200.csv", 0.4, 200)]
    outputs = []
    for idx, (name, theta, n) in enumerate(panels):
        p = replace(base, theta=theta, n=n)
        path = os.path.join(out_dir, name)
        if n_sims == 0:
            write_csv(path, SIM_HEADER, [])
        else:
            simulate_experiment(p, SeedSpec(seed.base, seed.stream + idx),
                                n_sims, path, workers=workers)
        outputs.append(path)
    return outputs


FIG2_N_GRID = (120, 240, 480, 960, 1440, 1920, 2560, 3200, 3840)
# cutoffs chosen by histogram inspection for small n; 200 for n > 480
FIG2_CUTOFFS = {
    1: {120: 36, 240: 75, 480: 150},
    2: {120: 50, 240: 100, 480: 150},
    3: {120: 25, 240: 50, 480: 100},
}


def fig2_cutoff(d: int, n: int) -> int:
    if n > 480:
        return 200
    return FIG2_CUTOFFS.get(d, {}).get(n, default_cutoff(n))


def fig2_n_grid(d: int, h: int = 4):
    """The paper's n grid, snapped to the nearest multiple of w.

    For d = 3 this reproduces the published substitutions 2560 -> 2556 and
    3200 -> 3204 exactly.
    """
    w = d * h
    return [int(round(n / w)) * w for n in FIG2_N_GRID]


FIG2_HEADER = ("n", "d", "cutoff", "n_sims", "rho_hat", "rho_lo", "rho_hi",
               "n_major", "z_hat", "z_lo", "z_hi", "rho_analytic",
               "z_analytic")


def figure2_experiment(out_dir, seed: SeedSpec, *, n_sims=10_000,
                       n_majors=10_000, ds=(1, 2, 3), workers=1,
                       n_mc=1_000_000, params: ModelParams | None = None):
    """Convergence of simulated rho and z to their limits over an n grid.

    Two independent batches per (n, d): one estimates rho as the fraction of
    runs at or above the cutoff, the other simulates until the requested
    number of major outbreaks and averages their fractions.
    """
    os.makedirs(out_dir, exist_ok=True)
    base = params or figure_defaults()
    rows = []
    for d in ds:
        p_d = replace(base, d=int(d), n=None)
        report = analytics.analyze(p_d, n_mc=n_mc, seed=seed, exact="auto")
        for j, n in enumerate(fig2_n_grid(d, base.h)):
            p = replace(p_d, n=n)
            cutoff = fig2_cutoff(d, n)
            s1 = SeedSpec(seed.base, seed.stream + 101 * d + 2 * j)
            s2 = SeedSpec(seed.base, seed.stream + 101 * d + 2 * j + 1)
            summary, _ = run_batch(p, n_sims, s1, cutoff=cutoff,
                                   workers=workers)
            majors = run_until_majors(p, s2, n_majors, cutoff=cutoff,
                                      workers=workers)
            zsum = estimate_rho_z(majors, n, cutoff)
            rows.append((n, d, cutoff, n_sims, summary.rho_hat,
                         summary.rho_ci[0], summary.rho_ci[1], n_majors,
                         zsum.z_hat, zsum.z_ci[0], zsum.z_ci[1],
                         report.rho, report.z))
    path = os.path.join(out_dir, "fig2_convergence.csv")
    write_csv(path, FIG2_HEADER, rows)
    return path, rows


def figure3_experiment(out_dir, seed: SeedSpec, *, h=3,
                       thetas=None, ds=(1, 2, 3, 4),
                       laws=("constant", "exponential"), n_mc=100_000,
                       exact="auto", cache_dir=None):
    """Final-size curves z(theta) per d, for constant and exponential periods."""
    os.makedirs(out_dir, exist_ok=True)
    thetas = list(np.round(np.arange(0.0, 1.0001, 0.05), 10)) \
        if thetas is None else list(thetas)
    bh, bw, bg = from_reparam(3.0, 0.025, 0.5)
    base = ModelParams(h=h, d=1, theta=0.0, beta_h=bh, beta_w=bw, beta_g=bg)
    path = os.path.join(out_dir, "fig3_sweep.csv")
    rows = sweep_experiment(base, seed, thetas, list(ds), list(laws), n_mc,
                            exact, path, cache_dir=cache_dir)
    return path, rows
