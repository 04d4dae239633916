"""Batch figure renderer for the Hamilton-Jacobi laboratory's CSV output.

Consumes the runner's versioned CSV contract and emits deterministic PNG/SVG
images: regime maps with analytic threshold curves, concentration-ladder
plots, Hoelder increment fits and convergence diagrams.  The threshold
formulas are re-implemented here on purpose; a build-breaking test compares
them against the solver package through its command-line interface.
"""

__version__ = "0.1.0"

from .boundaries import hj_regularity_thresholds, mfg_growth_thresholds
from .figspec import FigureSpec, load_figure_spec
from .render import RenderResult, render

__all__ = [
    "__version__",
    "hj_regularity_thresholds",
    "mfg_growth_thresholds",
    "FigureSpec",
    "load_figure_spec",
    "RenderResult",
    "render",
]
