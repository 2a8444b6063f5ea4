"""Offline figure generation for tdubench CSV outputs."""

from .figures import FIGURE_IDS, FigureSpec, SchemaMismatch, build_figure, render

__version__ = "0.1.0"
__all__ = ["FIGURE_IDS", "FigureSpec", "SchemaMismatch", "build_figure", "render"]
