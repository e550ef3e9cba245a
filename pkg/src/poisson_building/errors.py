"""Exception types shared across the package."""


class PoissonGridError(Exception):
    """Base class for all package errors."""


class ParameterError(PoissonGridError, ValueError):
    """Invalid model parameters or a violated precondition."""


class DomainError(ParameterError):
    """Argument outside the mathematical domain of an operation."""


class NonConvergenceError(PoissonGridError, ArithmeticError):
    """A truncated series could not certify its tolerance within the radius cap."""

    def __init__(self, message, *, radius=None, bound=None):
        super().__init__(message)
        self.radius = radius
        self.bound = bound


class QuadratureError(PoissonGridError, ArithmeticError):
    """Numerical integration failed to reach the requested accuracy."""
