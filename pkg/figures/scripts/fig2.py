#!/usr/bin/env python3
"""Render a figure-2 style convergence plot: fig2.py --in ... --out fig.png"""
import sys

from epifigures.cli import main

if __name__ == "__main__":
    sys.exit(main(["--kind", "convergence"] + sys.argv[1:]))
