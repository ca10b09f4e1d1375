"""Active-learning optimization with deep kernel learning on synthetic testbeds."""

__version__ = "0.1.0"

from .errors import InvalidArgument, InvalidState, LoadFailure, NumericFailure

__all__ = [
    "__version__",
    "InvalidArgument",
    "InvalidState",
    "LoadFailure",
    "NumericFailure",
]
