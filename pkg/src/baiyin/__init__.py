"""Quantitative spectral-edge estimates for random sign matrices and their
application to Euclidean sections of l1."""

__version__ = "0.1.0"

from ._accel import backend
from .errors import (
    BaiyinError,
    BudgetError,
    ConfigError,
    DimensionError,
    DomainError,
    NumericFailure,
    RangeError,
)
from .randmat import SignMatrix, covariance, derive_seed, gen_sign_matrix, t_matrix

__all__ = [
    "__version__",
    "backend",
    "BaiyinError",
    "BudgetError",
    "ConfigError",
    "DimensionError",
    "DomainError",
    "NumericFailure",
    "RangeError",
    "SignMatrix",
    "covariance",
    "derive_seed",
    "gen_sign_matrix",
    "t_matrix",
]
