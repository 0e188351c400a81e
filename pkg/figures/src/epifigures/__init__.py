"""Figure renderers for the overlapsir CSV schemas."""

from .render import FigureSpec, FigureError, render, load_csv

__version__ = "0.1.0"
