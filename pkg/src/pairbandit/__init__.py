"""Continuum-armed bandit optimization with batch pairwise-comparison oracles."""

from pairbandit.errors import (
    BudgetExhausted,
    ConfigError,
    DimensionMismatch,
    EmptyCube,
    FeatureDimOverflow,
    InfeasibleRegion,
    NotSPD,
)

__version__ = "0.1.0"

__all__ = [
    "BudgetExhausted",
    "ConfigError",
    "DimensionMismatch",
    "EmptyCube",
    "FeatureDimOverflow",
    "InfeasibleRegion",
    "NotSPD",
    "__version__",
]
