"""Exception hierarchy shared by every module."""

from __future__ import annotations


class SlowFastError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(SlowFastError, ValueError):
    """A parameter violates its declared bound or is unknown."""


class InvalidStateError(SlowFastError, ValueError):
    """A state is malformed or inconsistent with the model's totals."""


class DegenerateTimescaleError(SlowFastError, ValueError):
    """The slow-time form was requested at a non-positive epsilon."""


class UnsupportedOperationError(SlowFastError):
    """The system lacks a hook required by the operation."""


class DomainUndefinedError(SlowFastError, ValueError):
    """Epsilon lies outside the validity interval of a domain family."""


class DomainError(SlowFastError, ValueError):
    """A point lies outside the region where a formula is defined."""


class EvaluationError(SlowFastError, FloatingPointError):
    """A vector field or Jacobian produced non-finite values."""


class SingularJacobianError(SlowFastError, ValueError):
    """A Jacobian that must be invertible is numerically singular."""


class NoConvergenceError(SlowFastError):
    """An iterative solver failed; ``last`` holds the final iterate."""

    def __init__(self, message: str, last=None, residual: float | None = None):
        super().__init__(message)
        self.last = last
        self.residual = residual


class LeftDomainError(SlowFastError):
    """A trajectory left the domain it was required to stay in."""

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory
