"""
Exceptions - Core
Error hierarchy shared by every lab module.
"""

from typing import List, Optional


class StochLabError(Exception):
    """Base class for all lab errors."""


class DomainError(StochLabError):
    """A geometric query was made at a point where it is undefined."""


class ArgumentError(StochLabError, ValueError):
    """An operation was called outside its precondition."""


class UnsupportedDomainError(StochLabError):
    """The requested operation is not available for this domain kind."""


class StencilEscapeError(StochLabError):
    """A shifted mollification stencil left the domain."""


class DependencyError(StochLabError):
    """A required upstream result is missing or inconsistent."""


class UsageError(StochLabError):
    """An oracle was used in a mode it does not support."""


class NumericError(StochLabError):
    """An iterative or time-stepping procedure failed."""


class ProjectionError(NumericError):
    """Boundary projection did not converge."""

    def __init__(self, message: str, iterations: int):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations


class SchemeError(NumericError):
    """Finite-difference scheme produced an unstable solution."""


class ConfigValidationError(StochLabError):
    """Experiment configuration failed validation."""

    def __init__(self, failures: List, message: Optional[str] = None):
        self.failures = list(failures)
        summary = ", ".join(str(getattr(f, "path", f)) for f in self.failures)
        super().__init__(message or f"invalid configuration: {summary}")
