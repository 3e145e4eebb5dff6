"""Exception hierarchy shared by every module."""

from __future__ import annotations


class ShadowPriceError(Exception):
    """Base class for all package errors."""


class ParameterError(ShadowPriceError, ValueError):
    """An argument is outside its documented domain.

    ``field`` names the offending parameter so callers (notably the CLI)
    can report field-level messages.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class FactorizationError(ShadowPriceError, ArithmeticError):
    """Cholesky factorization of a covariance matrix failed."""

    def __init__(self, pivot: int, message: str):
        self.pivot = pivot
        super().__init__(f"factorization failed at pivot {pivot}: {message}")


class ConditioningError(ShadowPriceError, ArithmeticError):
    """A Gaussian conditioning block is numerically singular."""

    def __init__(self, indices, message: str):
        self.indices = tuple(int(i) for i in indices)
        super().__init__(f"singular conditioning block at time indices {self.indices}: {message}")


class ResourceError(ShadowPriceError):
    """A requested object would exceed a hard size guard."""


class InfeasibleError(ShadowPriceError):
    """No (strictly) consistent price system exists on the given tree."""


class SolverError(ShadowPriceError, RuntimeError):
    """An iterative solver failed to reach its tolerance.

    The best iterate and its residual are attached for inspection.
    """

    def __init__(self, message: str, best=None, residual: float = float("nan")):
        self.best = best
        self.residual = residual
        super().__init__(f"{message} (residual={residual:.3e})")


class VerificationError(ShadowPriceError, AssertionError):
    """A structural check failed; ``report`` carries the per-check details."""

    def __init__(self, message: str, report=None):
        self.report = report
        super().__init__(message)


class ShapeError(ShadowPriceError, ValueError):
    """The tree shape is not supported by the requested computation."""
