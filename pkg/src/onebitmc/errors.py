"""Exception types raised across the package."""


class OneBitError(Exception):
    """Base class for all package errors."""


class DomainError(OneBitError, ValueError):
    """An argument lies outside the domain of an operation."""


class ModelError(OneBitError, ValueError):
    """A link model violates a regularity requirement on an interval."""


class SamplingError(OneBitError, ValueError):
    """A sampling request cannot be satisfied."""


class SolverError(OneBitError, RuntimeError):
    """An iterative solver produced a non-finite objective."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
