"""fraqplot: figure rendering for fraq run outputs."""

__version__ = "0.1.0"

from .figures import FigureError, FigureSpec, load_spec, render
