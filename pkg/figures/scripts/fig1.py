#!/usr/bin/env python3
"""Render a figure-1 style histogram plot: fig1.py --in ... --out fig.png"""
import sys

from epifigures.cli import main

if __name__ == "__main__":
    sys.exit(main(["--kind", "histogram"] + sys.argv[1:]))
