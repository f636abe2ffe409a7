"""Exception types shared across the package."""


class CecoError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(CecoError, ValueError):
    """Shapes or dimensions are inconsistent (e.g. d < K for an ETF)."""


class DegenerateColumnError(CecoError, ValueError):
    """A matrix column has (near-)zero norm where a direction is required."""


class NormalizationError(CecoError, ValueError):
    """A vector expected to be unit-norm is not."""


class InsufficientClassesError(CecoError, ValueError):
    """Fewer than two usable classes remain after exclusions."""


class ExcludedClassError(CecoError, ValueError):
    """A zero-count class was passed where only observed classes are valid."""


class UndefinedCorrelationError(CecoError, ValueError):
    """Pearson correlation requested with a zero-variance argument."""


class GenerationError(CecoError, ValueError):
    """Scene generation cannot satisfy the requested class-frequency profile."""


class DivergenceError(CecoError, FloatingPointError):
    """Training produced non-finite losses or gradients."""


class StaleCacheError(CecoError, ValueError):
    """Backward pass called with activations from a different forward pass."""


class NumericError(CecoError, FloatingPointError):
    """Non-finite values encountered in a numeric kernel."""
