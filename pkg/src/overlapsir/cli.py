"""Command-line entry point.

Subcommands: generate, simulate, census, tables, analyze, sweep, fig1, fig2,
fig3.  Exit code 0 on success, 2 on configuration errors, 3 on numerical
non-convergence.  Every subcommand writes a manifest JSON beside its outputs;
replaying a manifest reproduces the output bytes for any worker count.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import experiments
from .analytics import NonConvergence
from .params import ConfigError, SeedSpec, load_config


def _parse_grid(spec: str):
    """"a:step:b" inclusive grid, or a comma-separated list."""
    if ":" in spec:
        a, step, b = (float(x) for x in spec.split(":"))
        count = int(round((b - a) / step)) + 1
        return [round(a + i * step, 10) for i in range(count)]
    return [float(x) for x in spec.split(",")]


def _add_config(p, required=True):
    p.add_argument("--config", required=required, help="flat key=value config file")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")


def _load(args, need_n=False):
    if args.config:
        params, seed = load_config(args.config)
        with open(args.config, "r", encoding="utf-8") as fh:
            snapshot_text = fh.read()
    else:
        params, seed = experiments.figure_defaults(), SeedSpec(0)
        snapshot_text = "(built-in figure defaults)"
    if args.seed is not None:
        seed = SeedSpec(args.seed)
    if need_n and params.n is None:
        raise ConfigError("this subcommand needs n in the config")
    return params, seed, snapshot_text


def _finish(args, subcommand, params, seed, flags, outputs, t0, workers=1):
    snapshot = experiments.config_snapshot(params, seed)
    manifest_path = args.manifest or (outputs[0] + ".manifest.json")
    experiments.write_manifest(manifest_path, subcommand, snapshot, flags,
                               outputs, time.time() - t0, workers,
                               argv=getattr(args, "_argv", None))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="overlapsir",
        description="SIR final-outcome analytics and simulation on a "
                    "population with overlapping household and workplace "
                    "group structures")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="emit one population as CSV")
    _add_config(p)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("simulate", help="batch of final-outcome epidemics")
    _add_config(p)
    p.add_argument("--sims", type=int, default=10_000)
    p.add_argument("--cutoff", type=int, default=None,
                   help="major-outbreak cutoff (default ceil(log n))")
    p.add_argument("--fresh-network", choices=("true", "false"),
                   default="true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("census", help="clump and susceptibility-set sizes on "
                                      "one realized local-contact graph")
    _add_config(p)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("tables", help="offspring PMF tables")
    _add_config(p)
    p.add_argument("--which", default="susset-coarse",
                   choices=("clump-coarse", "susset-coarse", "clump-fine"))
    p.add_argument("--mc-samples", type=int, default=100_000)
    p.add_argument("--exact", choices=("auto", "force", "off"), default="auto")
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("analyze", help="thresholds, final size and outbreak "
                                       "probability")
    _add_config(p)
    p.add_argument("--quantity", default="all",
                   choices=("rl", "rstar", "z", "rho", "all"))
    p.add_argument("--mc-samples", type=int, default=100_000)
    p.add_argument("--mc-fine", type=int, default=None)
    p.add_argument("--exact", choices=("auto", "force", "off"), default="auto")
    p.add_argument("--unprimed-seed-rates", action="store_true",
                   help="draw ancestor contact counts at total instead of "
                        "per-pair rates (literal-formula comparison mode)")
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("sweep", help="analytics over a (theta, d) grid")
    _add_config(p)
    p.add_argument("--theta", default="0:0.05:1", help="a:step:b or a list")
    p.add_argument("--d", default="1,2,3,4")
    p.add_argument("--laws", default=None,
                   help="comma list of period laws (default: config law)")
    p.add_argument("--mc-samples", type=int, default=100_000)
    p.add_argument("--exact", choices=("auto", "force", "off"), default="auto")
    p.add_argument("--with-rho", action="store_true",
                   help="run the severity-transform rho at every grid point "
                        "even for non-constant periods (slow)")
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("fig1", help="final-size histogram panels")
    _add_config(p, required=False)
    p.add_argument("--sims", type=int, default=10_000)
    p.add_argument("--paper-scale", action="store_true",
                   help="use the full 100,000-simulation protocol")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("fig2", help="convergence of simulated rho and z")
    _add_config(p, required=False)
    p.add_argument("--sims", type=int, default=10_000)
    p.add_argument("--majors", type=int, default=2_000)
    p.add_argument("--d", default="1,2,3")
    p.add_argument("--paper-scale", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("fig3", help="z versus theta per d and period law")
    _add_config(p, required=False)
    p.add_argument("--mc-samples", type=int, default=100_000)
    p.add_argument("--theta", default="0:0.05:1")
    p.add_argument("--d", default="1,2,3,4")
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("replay", help="re-run a manifest and verify that the "
                                      "outputs are byte-identical")
    p.add_argument("--manifest", required=True)
    p.add_argument("--workers", type=int, default=None,
                   help="override the worker count (content is unaffected)")
    return parser


def _run(args) -> int:
    t0 = time.time()
    cmd = args.command
    if cmd == "generate":
        params, seed, _ = _load(args, need_n=True)
        experiments.generate_experiment(params, seed, args.out)
        _finish(args, cmd, params, seed, {}, [args.out], t0)
    elif cmd == "simulate":
        params, seed, _ = _load(args, need_n=True)
        fresh = args.fresh_network == "true"
        experiments.simulate_experiment(
            params, seed, args.sims, args.out, cutoff=args.cutoff,
            fresh_network=fresh, workers=args.workers)
        _finish(args, cmd, params, seed,
                {"sims": args.sims, "cutoff": args.cutoff,
                 "fresh_network": fresh},
                [args.out], t0, workers=args.workers)
    elif cmd == "census":
        params, seed, _ = _load(args, need_n=True)
        experiments.census_experiment(params, seed, args.out)
        _finish(args, cmd, params, seed, {}, [args.out], t0)
    elif cmd == "tables":
        params, seed, _ = _load(args)
        experiments.tables_experiment(params, seed, args.which,
                                      args.mc_samples, args.exact, args.out,
                                      cache_dir=args.cache_dir)
        _finish(args, cmd, params, seed,
                {"which": args.which, "mc_samples": args.mc_samples,
                 "exact": args.exact}, [args.out], t0)
    elif cmd == "analyze":
        params, seed, _ = _load(args)
        experiments.analyze_experiment(
            params, seed, args.quantity, args.mc_samples, args.exact,
            args.out, n_mc_fine=args.mc_fine, cache_dir=args.cache_dir,
            unprimed=args.unprimed_seed_rates)
        _finish(args, cmd, params, seed,
                {"quantity": args.quantity, "mc_samples": args.mc_samples,
                 "exact": args.exact}, [args.out], t0)
    elif cmd == "sweep":
        params, seed, _ = _load(args)
        thetas = _parse_grid(args.theta)
        ds = [int(x) for x in args.d.split(",")]
        laws = (args.laws.split(",") if args.laws
                else [params.infectious_period.spec()])
        experiments.sweep_experiment(params, seed, thetas, ds, laws,
                                     args.mc_samples, args.exact, args.out,
                                     cache_dir=args.cache_dir,
                                     with_rho=args.with_rho)
        _finish(args, cmd, params, seed,
                {"theta": args.theta, "d": args.d, "laws": laws,
                 "mc_samples": args.mc_samples}, [args.out], t0)
    elif cmd == "fig1":
        params, seed, _ = _load(args)
        sims = 100_000 if args.paper_scale else args.sims
        outputs = experiments.figure1_experiment(
            args.out_dir, seed, n_sims=sims, workers=args.workers,
            params=params if args.config else None)
        args.manifest = args.manifest or os.path.join(args.out_dir,
                                                      "fig1.manifest.json")
        _finish(args, cmd, params, seed, {"sims": sims}, outputs, t0,
                workers=args.workers)
    elif cmd == "fig2":
        params, seed, _ = _load(args)
        sims = args.sims
        majors = 10_000 if args.paper_scale else args.majors
        ds = tuple(int(x) for x in args.d.split(","))
        path, _ = experiments.figure2_experiment(
            args.out_dir, seed, n_sims=sims, n_majors=majors, ds=ds,
            workers=args.workers, params=params if args.config else None)
        args.manifest = args.manifest or os.path.join(args.out_dir,
                                                      "fig2.manifest.json")
        _finish(args, cmd, params, seed, {"sims": sims, "majors": majors,
                                          "d": args.d}, [path], t0,
                workers=args.workers)
    elif cmd == "fig3":
        params, seed, _ = _load(args)
        thetas = _parse_grid(args.theta)
        ds = tuple(int(x) for x in args.d.split(","))
        path, _ = experiments.figure3_experiment(
            args.out_dir, seed, thetas=thetas, ds=ds,
            n_mc=args.mc_samples, cache_dir=args.cache_dir)
        args.manifest = args.manifest or os.path.join(args.out_dir,
                                                      "fig3.manifest.json")
        _finish(args, cmd, params, seed, {"theta": args.theta, "d": args.d,
                                          "mc_samples": args.mc_samples},
                [path], t0)
    elif cmd == "replay":
        return _replay(args)
    return 0


def _replay(args) -> int:
    with open(args.manifest, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    argv = manifest.get("argv")
    if not argv:
        raise ConfigError("manifest carries no argv to replay")
    # worker count never affects output content, only scheduling
    if args.workers is not None:
        filtered, skip = [], False
        for token in argv:
            if skip:
                skip = False
                continue
            if token == "--workers":
                skip = True
                continue
            filtered.append(token)
        argv = filtered + ["--workers", str(args.workers)]
    code = main(argv)
    if code != 0:
        return code
    out_dir = os.path.dirname(os.path.abspath(args.manifest))
    for name, digest in manifest["outputs"].items():
        produced = experiments.sha256_file(os.path.join(out_dir, name)) \
            if os.path.exists(os.path.join(out_dir, name)) else None
        # outputs may live elsewhere; fall back to the recorded basename path
        if produced != digest:
            candidates = [tok for tok in argv if tok.endswith(name)]
            if candidates:
                produced = experiments.sha256_file(candidates[0])
        if produced != digest:
            print(f"replay mismatch for {name}", file=sys.stderr)
            return 1
    print("replay verified: outputs byte-identical")
    return 0


def main(argv=None) -> int:
    effective = list(argv) if argv is not None else sys.argv[1:]
    args = build_parser().parse_args(effective)
    args._argv = effective
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NonConvergence as exc:
        print(f"numerical non-convergence: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
