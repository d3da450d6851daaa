"""Publication-style figures from slowobs diagnostic CSV files.

Strictly read-only over the CSVs: no physics is recomputed here.
"""

from slowplots.figspec import FigureSpec, SpecError
from slowplots.data import SchemaError, load_table
from slowplots.render import render

__all__ = [
    "FigureSpec",
    "SpecError",
    "SchemaError",
    "load_table",
    "render",
]
