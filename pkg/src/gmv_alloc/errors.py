"""Exception hierarchy shared by every module."""

from __future__ import annotations


class GmvError(Exception):
    """Base class for all library errors."""


class DomainError(GmvError, ValueError):
    """An input lies outside the domain where a formula is defined."""


class LogDomainError(DomainError):
    """The argument of a logarithmic risk term is not positive.

    ``value`` carries the offending argument so solvers can reject the step.
    """

    def __init__(self, message: str, value: float):
        super().__init__(message)
        self.value = value


class NumericalError(GmvError, ArithmeticError):
    """A linear-algebra operation failed (e.g. a matrix is not positive definite)."""

    def __init__(self, message: str, condition_number: float | None = None):
        if condition_number is not None:
            message = f"{message} (condition number {condition_number:.3e})"
        super().__init__(message)
        self.condition_number = condition_number


class NotConvergedError(GmvError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message: str, best=None, residual: float = float("nan")):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.best = best
        self.residual = residual


class QuadratureError(GmvError):
    """Numerical integration failed to converge or the integral diverges."""

    def __init__(self, message: str, error_estimate: float = float("inf")):
        super().__init__(f"{message} (error estimate {error_estimate:.3e})")
        self.error_estimate = error_estimate
