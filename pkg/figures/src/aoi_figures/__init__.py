"""Figure rendering for aoi-sampling sweep CSVs."""

from .render import FigureSpec, RenderError, build_figure, load_rows, render

__all__ = ["FigureSpec", "RenderError", "build_figure", "load_rows", "render"]
