"""Exception types shared across the package."""


class HyperkernelError(Exception):
    """Base class for all package errors."""


class DomainError(HyperkernelError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class AccuracyError(HyperkernelError, ArithmeticError):
    """A numerical routine could not reach the requested accuracy."""


class InvalidKernelError(HyperkernelError, ValueError):
    """A kernel specification violates its validity conditions."""


class NotPositiveDefiniteError(HyperkernelError, ValueError):
    """Cholesky factorisation hit a non-positive pivot.

    ``pivot`` is the zero-based index of the failing pivot.
    """

    def __init__(self, pivot, message=None):
        self.pivot = pivot
        super().__init__(message or f"matrix is not positive definite (pivot index {pivot})")


class FitError(HyperkernelError, RuntimeError):
    """Maximum-likelihood fitting failed on every restart."""
