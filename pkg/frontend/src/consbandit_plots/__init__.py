"""Figure rendering for consbandit summary CSVs."""

from .figures import FigureInputError, FigureSpec, build_figure, load_summary, render

__version__ = "0.1.0"
