"""Exception types shared across the package."""


class BregmanError(Exception):
    """Base class for all package errors."""


class UsageError(BregmanError):
    """The caller violated an API contract (bad shapes, bad arguments)."""


class DomainError(BregmanError):
    """A point fell outside the domain of a function or of its conjugate."""


class FixtureError(UsageError):
    """A scenario fixture violates a standing assumption of the method."""


class NonconvergenceError(BregmanError):
    """An iterative solver hit its cap without meeting its tolerances."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = dict(residuals or {})


class NumericalDegeneracyError(BregmanError):
    """A formula hit a numerically degenerate configuration, e.g. a vanishing
    denominator that the exact theory rules out."""


class ConfigError(UsageError):
    """A scenario configuration failed validation; ``path`` names the field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class TraceFormatError(BregmanError):
    """A stored trace file could not be parsed."""
