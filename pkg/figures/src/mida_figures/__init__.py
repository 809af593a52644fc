"""Figure rendering for mediation-experiment CSV outputs."""

from .render import (
    EmptyInputError,
    FigureError,
    FigureJob,
    KINDS,
    REQUIRED_COLUMNS,
    SchemaError,
    render,
)

__version__ = "0.1.0"
