"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class DimensionError(ValueError):
    """Array shapes do not agree (e.g. a weight vector of the wrong length)."""


class NumericError(ArithmeticError):
    """A numerical routine failed to produce a trustworthy result."""
