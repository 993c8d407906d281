"""Render figures from spinecho data products.

Strictly read-only consumers of the simulator's CSV/JSON files: every number
plotted here was computed by the primary package, never recomputed.
"""

__version__ = "0.1.0"

from .figspec import FIGURE_IDS, FigureSpec, SchemaError, read_table
from .render import render

__all__ = ["FIGURE_IDS", "FigureSpec", "SchemaError", "read_table", "render", "__version__"]
