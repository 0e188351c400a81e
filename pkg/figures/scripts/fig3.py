#!/usr/bin/env python3
"""Render a figure-3 style sweep plot: fig3.py --in ... --out fig.png"""
import sys

from epifigures.cli import main

if __name__ == "__main__":
    sys.exit(main(["--kind", "sweep"] + sys.argv[1:]))
