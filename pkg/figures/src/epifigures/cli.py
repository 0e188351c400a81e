"""CLI: epifig --kind {histogram,convergence,sweep} --in a.csv [b.csv ...] --out fig.png"""
from __future__ import annotations

import argparse
import sys

from .render import FigureError, FigureSpec, render


def build_parser():
    parser = argparse.ArgumentParser(
        prog="epifig", description="Render figures from overlapsir CSVs")
    parser.add_argument("--kind", required=True,
                        choices=("histogram", "convergence", "sweep"))
    parser.add_argument("--in", dest="inputs", required=True, nargs="+",
                        help="input CSV file(s)")
    parser.add_argument("--out", required=True, help="output PNG path")
    parser.add_argument("--title", default="")
    parser.add_argument("--xlabel", default="")
    parser.add_argument("--ylabel", default="")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(inputs=tuple(args.inputs), kind=args.kind,
                      output=args.out, title=args.title,
                      xlabel=args.xlabel, ylabel=args.ylabel)
    try:
        render(spec)
    except (FigureError, OSError, ValueError) as exc:
        print(f"figure error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
