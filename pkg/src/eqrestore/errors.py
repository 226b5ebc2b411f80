"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: ConfigError -> 1,
IOError-family (including ParseError) -> 2, NumericError -> 3.
"""


class EqrestoreError(Exception):
    """Base class for all package errors."""


class DimensionError(EqrestoreError):
    """Operand shapes are incompatible."""


class ConfigError(EqrestoreError):
    """Invalid configuration value or combination."""


class ParseError(EqrestoreError):
    """Malformed file content; carries the byte offset where parsing failed."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UnsupportedError(EqrestoreError):
    """Operation not defined for this object (e.g. enumerate on an infinite group)."""


class DomainError(EqrestoreError):
    """Point lies outside the domain of the function being evaluated."""


class NumericError(EqrestoreError):
    """Numerical failure: non-finite values, failed inversion, ..."""


class DivergedError(NumericError):
    """Iteration left the trust region; carries the iteration index."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration
