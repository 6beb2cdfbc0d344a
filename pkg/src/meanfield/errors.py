"""Exception types shared across the package."""


class MeanFieldError(Exception):
    """Base class for all package errors."""


class ConfigurationError(MeanFieldError, ValueError):
    """Invalid resolution, parameter, or configuration value."""


class WallError(ConfigurationError):
    """A coupling lies on (or too close to) the set 8*pi*k, k >= 1."""


class BlowUpSuspected(MeanFieldError):
    """The exponential nonlinearity can no longer be evaluated reliably."""

    def __init__(self, message, max_abs_u=float("nan"), location=None):
        super().__init__(message)
        self.max_abs_u = max_abs_u
        self.location = location


class NonConvergence(MeanFieldError):
    """An iteration stopped before reaching its residual tolerance."""

    def __init__(self, message, residual=float("nan"), iterations=0, last=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.last = last


class BranchLost(NonConvergence):
    """Continuation hit its minimum step without converging."""


class RadiusError(MeanFieldError):
    """A zero of a Galerkin map lies too close to the degree ball boundary."""


class DegenerateZero(MeanFieldError):
    """The Jacobian at a located zero is numerically singular."""
