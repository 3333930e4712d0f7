"""Exception types raised across the package."""


class Lorenz96Error(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(Lorenz96Error, ValueError):
    """Dimension mismatch, index out of range or otherwise malformed input."""


class UnsupportedDimensionError(InvalidArgumentError):
    """The requested operation is only defined for n >= 4."""


class NoCrossingError(InvalidArgumentError):
    """The eigenpair index never crosses the imaginary axis (l = 0, l >= n/2 or l = n/3)."""


class ExcludedParameterError(InvalidArgumentError):
    """Parameter value excluded from a formula's domain (e.g. F = 0 on a Hopf line)."""


class NoTrappingError(InvalidArgumentError):
    """G <= -1/4: no trapping-region guarantee."""


class DegenerateError(Lorenz96Error):
    """A nondegeneracy condition fails (zero Lyapunov coefficient, singular unfolding)."""


class DivergenceError(Lorenz96Error, RuntimeError):
    """Integration produced a non-finite state or left the guard ball."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class NoCycleError(Lorenz96Error, RuntimeError):
    """Newton iteration for a periodic orbit did not converge."""


class NotPeriodicError(Lorenz96Error, ValueError):
    """Signal has no stable crossing spacing."""


class PreOnsetError(InvalidArgumentError):
    """Forcing below the Hopf value: no wave to predict."""


class UndefinedWaveError(Lorenz96Error, ValueError):
    """Spatially constant snapshot; the wave number is undefined."""
