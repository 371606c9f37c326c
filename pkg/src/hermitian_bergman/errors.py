"""Exception hierarchy shared by every module."""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class DomainError(ToolkitError, ValueError):
    """A point or stencil falls outside where a field is defined."""


class NumericalError(ToolkitError, ArithmeticError):
    """A computation produced non-finite or otherwise unusable numbers."""


class SingularMetricError(NumericalError):
    """The metric factorization hit a pivot below the singularity threshold."""


class SupportError(ToolkitError, ValueError):
    """A compactly supported input is not supported inside the quadrature box."""


class HolomorphyError(ToolkitError, ValueError):
    """A vector field required to be holomorphic is not."""


class ConfigError(ToolkitError, ValueError):
    """An experiment configuration failed validation.

    ``details`` holds machine-readable ``{loc, msg}`` records.
    """

    def __init__(self, message: str, details: list | None = None):
        super().__init__(message)
        self.details = list(details or [])


class CheckFailure(ToolkitError):
    """A precondition check (for example a positivity test) failed."""
