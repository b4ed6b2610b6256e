"""
pycorv.errors - Exception hierarchy

Every error raised on purpose by the library derives from PycorvError so the
CLI can tell a bad config or a diverging chain from a programming error.
"""

from typing import Any, Dict, List, Optional


class PycorvError(Exception):
    """Base class for all library errors."""


class ConfigError(PycorvError, ValueError):
    """Invalid configuration or incompatible arguments.

    `problems` lists every `field.path: message` found, so a config file is
    rejected with all of its mistakes at once.
    """

    def __init__(self, message: str, problems: Optional[List[str]] = None):
        self.problems: List[str] = list(problems or [])
        if self.problems:
            message = message + "\n  " + "\n  ".join(self.problems)
        super().__init__(message)


class DomainError(PycorvError, ValueError):
    """Argument outside the supported branch of a function."""


class NumericalOverflowError(PycorvError, ArithmeticError):
    """A gradient evaluation produced a non-finite value."""

    def __init__(self, message: str, value: Any = None,
                 intermediates: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.value = value
        self.intermediates = dict(intermediates or {})


class DivergenceError(PycorvError, ArithmeticError):
    """A sampler update left the representable range.

    The chain runner fills in `step_index` and `partial_trace` before
    re-raising, so callers can report how far the chain got.
    """

    def __init__(self, message: str, state: Any = None):
        super().__init__(message)
        self.state = state
        self.step_index: Optional[int] = None
        self.partial_trace: Any = None


class ComputationError(PycorvError, ArithmeticError):
    """Degenerate numerical input (e.g. a slope fit over constant x)."""


class DataParseError(PycorvError, ValueError):
    """Malformed row in a ratings file."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DataError(PycorvError, ValueError):
    """Well-formed but semantically invalid data."""
