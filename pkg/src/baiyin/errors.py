"""Exception types shared across the package."""


class BaiyinError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(BaiyinError, ValueError):
    """Invalid matrix or vector dimensions."""


class DomainError(BaiyinError, ValueError):
    """A parameter lies outside the region where a formula is defined."""


class BudgetError(BaiyinError, ValueError):
    """An exhaustive enumeration would exceed its size guard."""


class NumericFailure(BaiyinError, ArithmeticError):
    """An iterative numerical routine failed to converge.

    ``seed`` identifies the generating matrix when one is known.
    """

    def __init__(self, message, seed=None):
        super().__init__(message if seed is None else f"{message} (seed={seed})")
        self.seed = seed


class RangeError(BaiyinError, OverflowError):
    """A normalised quantity left the representable range."""

    def __init__(self, message, reached=None):
        super().__init__(message)
        self.reached = reached


class ConfigError(BaiyinError, ValueError):
    """Malformed or invalid experiment configuration."""

    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.reason = message
        self.key = key
        self.line = line
