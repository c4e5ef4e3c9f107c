from .render import FigureSpec, RenderError, Series, aggregate, render

__version__ = "0.1.0"

__all__ = ["FigureSpec", "RenderError", "Series", "aggregate", "render",
           "__version__"]
