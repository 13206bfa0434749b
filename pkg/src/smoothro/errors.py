"""Exception hierarchy shared by all modules."""


class SmoothROError(Exception):
    """Base class for errors raised by this package."""


class DomainError(SmoothROError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DimensionError(SmoothROError, ValueError):
    """Array shapes or indices are inconsistent."""


class NotPositiveDefiniteError(SmoothROError, ValueError):
    """Cholesky factorization met a non-positive pivot."""

    def __init__(self, pivot: int, value: float):
        super().__init__(f"matrix is not positive definite: pivot {pivot} has value {value:.3e}")
        self.pivot = pivot
        self.value = value


class IndefiniteMatrixError(SmoothROError, ValueError):
    """A matrix expected to be positive semidefinite has a negative eigenvalue."""


class EmptySetError(SmoothROError):
    """The uncertainty set defined by the parameters is empty."""


class UnsupportedFeatureError(SmoothROError):
    """The model uses a feature (e.g. integer variables) that no solver here handles."""


class OracleMismatchError(SmoothROError):
    """A recovered adversarial scenario does not reproduce the optimal value."""


class SolverError(SmoothROError):
    """An LP solve ended without an optimal solution where one is required."""

    def __init__(self, message: str, status: str | None = None):
        super().__init__(message)
        self.status = status


class PatternMismatchError(SmoothROError, ValueError):
    """A compact reformulation was requested for a constraint whose sign pattern does not admit it."""
