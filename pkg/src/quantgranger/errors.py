"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class QuantGrangerError(Exception):
    """Base class for all package errors."""


class DomainError(QuantGrangerError, ValueError):
    """An argument lies outside its admissible range (e.g. tau not in (0, 1))."""


class DimensionError(QuantGrangerError, ValueError):
    """Array shapes do not conform."""


class SingularityError(QuantGrangerError, ArithmeticError):
    """A matrix that must be positive definite (or nonsingular) is not.

    Attributes
    ----------
    pivot : int or None
        Index of the failing Cholesky pivot, when known.
    """

    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


class ConvergenceError(QuantGrangerError, RuntimeError):
    """The interior-point solver hit its iteration cap.

    Attributes
    ----------
    gap : float
        Relative duality gap at the last iterate.
    """

    def __init__(self, message: str, gap: float):
        super().__init__(message)
        self.gap = gap


class WindowError(QuantGrangerError, ValueError):
    """A subsample window holds too few observations for the restricted fit."""


class UnsupportedRescalingError(QuantGrangerError, ValueError):
    """The pivotal LM2 rescaling only exists for a single tested regressor."""


class DatasetError(QuantGrangerError, ValueError):
    """Input data could not be parsed or is empty."""
