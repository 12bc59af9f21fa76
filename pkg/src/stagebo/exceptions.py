"""Exception types shared across the package."""


class StageBoError(Exception):
    """Base class for all package errors."""


class DomainError(StageBoError, ValueError):
    """An input point lies outside the problem's box bounds."""


class DataError(StageBoError, ValueError):
    """Training data is malformed (wrong shape, non-finite targets, ...)."""


class NumericalError(StageBoError, ArithmeticError):
    """A linear-algebra operation failed beyond recovery (jitter exhausted)."""


class FrontUnavailableError(StageBoError, LookupError):
    """No analytic front exists and no cached front could be found."""


class ConfigError(StageBoError, ValueError):
    """A run configuration is invalid; raised before any evaluation."""


class AlignmentError(StageBoError, ValueError):
    """Per-seed result files do not share a common iteration grid."""
