"""Exact-arithmetic laboratory for discretized sum-product expansion."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    BudgetExceeded, EmptySetError, HypothesisViolation, LabError, OutOfAmbientError,
    PreconditionError, ScaleMismatch, TheoremViolation,
)
from .grid_set import GridSet, Scale  # noqa: F401
