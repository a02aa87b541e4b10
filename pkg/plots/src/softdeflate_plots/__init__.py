"""Figure rendering for softdeflate benchmark CSVs."""

from .render import (
    AGGREGATE_HEADER,
    FigureSpec,
    RenderError,
    aggregate,
    read_rows,
    render_comparison,
)

__all__ = [
    "AGGREGATE_HEADER",
    "FigureSpec",
    "RenderError",
    "aggregate",
    "read_rows",
    "render_comparison",
]
