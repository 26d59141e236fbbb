"""Exception types shared across the package."""


class HybridFpcaError(Exception):
    """Base class for all package-specific errors."""


class InvalidGridError(HybridFpcaError, ValueError):
    """Grid points are not strictly increasing or too short."""


class ShapeMismatchError(HybridFpcaError, ValueError):
    """Array extents do not conform to the grids or to each other."""


class InvalidDataError(HybridFpcaError, ValueError):
    """Non-finite values or structurally inconsistent input data."""


class InvalidConfigError(HybridFpcaError, ValueError):
    """Configuration value outside its documented range."""


class InsufficientSubjectsError(HybridFpcaError, ValueError):
    """An operation that averages across subjects received fewer than two."""


class IllPosedFitError(HybridFpcaError, RuntimeError):
    """Regression problem is rank deficient after predictor compression."""


class NumericalFailureError(HybridFpcaError, RuntimeError):
    """A numerical routine produced results outside its guaranteed range."""


class UndefinedCorrelationError(HybridFpcaError, ValueError):
    """Correlation requested for an array with zero variance."""
