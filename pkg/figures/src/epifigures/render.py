"""Render histogram, convergence and sweep figures from versioned CSVs.

This package is purely a consumer of the simulation CSV schemas: it computes
nothing, validates strictly (a wrong schema line or missing column is an
error, not a guess), and renders deterministically so identical inputs give
identical image bytes.
"""
from __future__ import annotations

import csv
import sys
from dataclasses import dataclass, field

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

EXPECTED_SCHEMA = "#schema=v1"

KIND_COLUMNS = {
    "histogram": {"run", "n", "final_size"},
    "convergence": {"n", "d", "rho_hat", "rho_lo", "rho_hi", "z_hat", "z_lo",
                    "z_hi", "rho_analytic", "z_analytic"},
    "sweep": {"theta", "d", "ip_law", "z", "R_star"},
}

STYLE = {
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}


class FigureError(ValueError):
    """Bad input for a figure: schema mismatch or missing columns."""


@dataclass(frozen=True)
class FigureSpec:
    inputs: tuple
    kind: str
    output: str
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""

    def __post_init__(self):
        if self.kind not in KIND_COLUMNS:
            raise FigureError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise FigureError("at least one input CSV is required")


def load_csv(path, kind):
    """Read a versioned CSV, checking the schema line and required columns."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != EXPECTED_SCHEMA:
            raise FigureError(f"{path}: expected {EXPECTED_SCHEMA!r} on the "
                              f"first line, found {first!r}")
        reader = csv.DictReader(fh)
        missing = KIND_COLUMNS[kind] - set(reader.fieldnames or ())
        if missing:
            raise FigureError(f"{path}: missing columns {sorted(missing)}")
        rows = list(reader)
    if not rows:
        print(f"warning: {path} has no data rows", file=sys.stderr)
    return rows


def _column(rows, name, cast=float):
    return np.array([cast(r[name]) for r in rows])


def _render_histogram(spec, fig):
    n_panels = len(spec.inputs)
    cols = 2 if n_panels > 1 else 1
    rows_ = (n_panels + cols - 1) // cols
    for i, path in enumerate(spec.inputs):
        rows = load_csv(path, "histogram")
        ax = fig.add_subplot(rows_, cols, i + 1)
        ax.set_xlabel(spec.xlabel or "fraction infected")
        ax.set_ylabel(spec.ylabel or "simulations")
        if not rows:
            continue
        n = _column(rows, "n", int)
        frac = _column(rows, "final_size") / n
        ax.hist(frac, bins=np.linspace(0, 1, 51), color="#4878a8")
        ax.set_title(f"n={n[0]}", fontsize=9)


def _render_convergence(spec, fig):
    rows = [r for path in spec.inputs for r in load_csv(path, "convergence")]
    ds = sorted({int(r["d"]) for r in rows}) or [None]
    for row_idx, d in enumerate(ds):
        sub = [r for r in rows if d is None or int(r["d"]) == d]
        for col, (hat, lo, hi, ref, label) in enumerate([
                ("rho_hat", "rho_lo", "rho_hi", "rho_analytic", "outbreak probability"),
                ("z_hat", "z_lo", "z_hi", "z_analytic", "major outbreak fraction")]):
            ax = fig.add_subplot(len(ds), 2, 2 * row_idx + col + 1)
            ax.set_xlabel(spec.xlabel or "population size n")
            ax.set_ylabel(label)
            if d is not None:
                ax.set_title(f"d={d}", fontsize=9)
            if not sub:
                continue
            n = _column(sub, "n")
            ax.errorbar(n, _column(sub, hat),
                        yerr=[_column(sub, hat) - _column(sub, lo),
                              _column(sub, hi) - _column(sub, hat)],
                        fmt="x", color="black", ecolor="#c44e52", capsize=2)
            ax.axhline(float(sub[0][ref]), linestyle="--", color="#4878a8")


def _render_sweep(spec, fig):
    rows = [r for path in spec.inputs for r in load_csv(path, "sweep")]
    laws = sorted({r["ip_law"] for r in rows}) or ["none"]
    for i, law in enumerate(laws):
        ax = fig.add_subplot(1, len(laws), i + 1)
        ax.set_xlabel(spec.xlabel or "mover probability theta")
        ax.set_ylabel(spec.ylabel or "limiting final size z")
        ax.set_title(law, fontsize=9)
        sub_law = [r for r in rows if r["ip_law"] == law]
        for d in sorted({int(r["d"]) for r in sub_law}):
            sub = sorted((r for r in sub_law if int(r["d"]) == d),
                         key=lambda r: float(r["theta"]))
            ax.plot(_column(sub, "theta"), _column(sub, "z"),
                    marker=".", label=f"d={d}")
        if sub_law:
            ax.legend(loc="lower right", fontsize=8)
        ax.set_ylim(-0.02, 1.0)


_RENDERERS = {
    "histogram": _render_histogram,
    "convergence": _render_convergence,
    "sweep": _render_sweep,
}


def render(spec: FigureSpec) -> str:
    """Render the figure described by spec; returns the output path."""
    with plt.rc_context(STYLE):
        size = {"histogram": (8, 6), "convergence": (8, 9),
                "sweep": (9, 4)}[spec.kind]
        fig = plt.figure(figsize=size)
        _RENDERERS[spec.kind](spec, fig)
        if spec.title:
            fig.suptitle(spec.title)
        fig.tight_layout()
        # pin the PNG metadata so identical inputs give identical bytes
        fig.savefig(spec.output, format="png",
                    metadata={"Software": "epifigures"})
        plt.close(fig)
    return spec.output
