"""Exception types raised by the library."""


class HessianError(Exception):
    """Base class for all library errors."""


class ConeDomainError(HessianError, ValueError):
    """A point lies outside the cone on which a function is defined."""


class MetricError(HessianError, ValueError):
    """The metric is not symmetric positive definite at some grid point."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class AdmissibilityError(HessianError):
    """A grid function is not admissible at some interior point.

    Attributes
    ----------
    margin : float
        The cone margin at the worst point.
    index : tuple of int
        Grid multi-index of the worst point.
    """

    def __init__(self, message, margin=None, index=None):
        super().__init__(message)
        self.margin = margin
        self.index = index


class NumericError(HessianError, RuntimeError):
    """An iterative procedure failed to converge or a solve broke down."""


class SamplingError(HessianError, RuntimeError):
    """Rejection sampling of a cone had too low an acceptance rate."""


class ConfigError(HessianError, ValueError):
    """A run configuration failed validation."""
