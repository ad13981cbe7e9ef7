"""Exception types raised by the dephase package."""

from __future__ import annotations


class DephaseError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(DephaseError, ValueError):
    pass


class NotSquare(DephaseError, ValueError):
    pass


class RankDeficientInconsistent(DephaseError):
    """A linear system has no solution within the requested residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class QuadratureNotConverged(DephaseError):
    pass


class InfeasibleWeights(DephaseError):
    """Solved mixture weights contain a negative entry.

    The full solution is kept on ``weights`` so callers can still report it.
    """

    def __init__(self, message: str, weights):
        super().__init__(message)
        self.weights = tuple(float(w) for w in weights)


class SingularSystem(DephaseError):
    pass


class BasisSearchFailed(DephaseError):
    pass


class SearchFailed(DephaseError):
    def __init__(self, message: str, best_residual: float):
        super().__init__(message)
        self.best_residual = best_residual


class CutoffTooSmall(DephaseError):
    pass


class SchemeUnavailable(DephaseError):
    pass
