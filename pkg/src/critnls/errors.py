"""Exception types raised by the solvers and checks."""


class CritNLSError(Exception):
    """Base class for all package errors."""


class SizingError(CritNLSError, ValueError):
    """Grid parameters below the supported minimum."""


class GridMismatchError(CritNLSError, ValueError):
    """Two fields live on different grids."""


class AssumptionError(CritNLSError, ValueError):
    """The nonlinearity violates <Lambda W, f(W)> < 0."""


class ConvergenceError(CritNLSError, RuntimeError):
    """An iteration failed to converge.

    ``level`` names the failing loop ("lambda", "eta", "outer", "newton").
    """

    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level


class BallExitError(ConvergenceError):
    """The eta iterate left the ball ||eta||_inf <= R * eps."""


class FactorizationError(CritNLSError, RuntimeError):
    """Banded factorization hit a zero pivot."""


class ResolutionError(CritNLSError, ValueError):
    """A rescaling would alias the grid."""


class StabilityError(CritNLSError, ValueError):
    """Time step too large for the current amplitude."""


class HypothesisError(CritNLSError, ValueError):
    """Initial data not strictly below the ground-state action."""
