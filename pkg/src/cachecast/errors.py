"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: parameter errors exit with 2,
numeric errors with 3, validation failures with 1.
"""


class CachecastError(Exception):
    """Base class for all package errors."""


class ParameterError(CachecastError, ValueError):
    """An argument violates a documented precondition or domain."""


class NumericsError(CachecastError, ArithmeticError):
    """A numerical routine exhausted its accuracy budget or produced
    a non-finite result. The message carries the achieved residual."""


class UnboundedDelayError(NumericsError):
    """A served user has zero instantaneous rate, so its delivery never
    completes under the fluid service model."""
