"""Conditional symmetry and reduction toolkit for scalar PDEs."""
from .expr import (
    Context,
    ZeroVerdict,
    differentiate,
    eval_numeric,
    is_zero,
    normalize,
    opaque,
    substitute,
)
from .jet import JetSpace, VectorFieldOp, apply_op, prolong, total_derivative

__version__ = "0.1.0"

__all__ = [
    "Context",
    "JetSpace",
    "VectorFieldOp",
    "ZeroVerdict",
    "apply_op",
    "differentiate",
    "eval_numeric",
    "is_zero",
    "normalize",
    "opaque",
    "prolong",
    "substitute",
    "total_derivative",
]
