"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition or invariant."""


class NumericError(ArithmeticError):
    """Raised when a computation produces non-finite values or fails a
    numeric verification (gradient check, divergence during training)."""
