"""figkit: figure regeneration for exported walking traces."""

from .render import FIGURE_KINDS, FigureSpec, RenderError, load_trace, render

__version__ = "0.1.0"
