"""
Exception types raised by the EVI-GP package
"""

from typing import Any, Optional


class EVIGPError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(EVIGPError, ValueError):
    """An argument violates the documented preconditions."""


class InvalidStateError(EVIGPError, RuntimeError):
    """An object is not in a state that allows the requested operation."""


class NumericalError(EVIGPError, ArithmeticError):
    """
    A numerical routine failed (factorization, non-finite value, solver abort).

    Args:
        message: Human readable description
        diagnostics: Optional mapping with condition numbers, jitter, etc.
        last_good: Optional last valid iterate (solvers attach it on abort)
    """

    def __init__(
        self,
        message: str,
        diagnostics: Optional[dict] = None,
        last_good: Any = None,
    ):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
        self.last_good = last_good
