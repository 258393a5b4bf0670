"""Common utilities shared between scribble_seg modules."""

from scribble_seg.common.container import ArrayHeader, parse_header, read_array, write_array
from scribble_seg.common.errors import (
    ConfigError,
    FormatError,
    NumericalError,
    ScribbleSegError,
    ValidationError,
)
from scribble_seg.common.reporter import Reporter, RunFailure, RunWarning

__all__ = [
    "ArrayHeader",
    "parse_header",
    "read_array",
    "write_array",
    "ConfigError",
    "FormatError",
    "NumericalError",
    "ScribbleSegError",
    "ValidationError",
    "Reporter",
    "RunFailure",
    "RunWarning",
]
