"""
Dense-matrix helpers shared by every alignment component.

Matrices are plain ``numpy.ndarray`` objects of dtype float64 in row-major
(C) order. The helpers here validate them and provide the stable reductions
the transport code relies on.
"""

from __future__ import annotations

import logging
from typing import Any, Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

from otalign.exceptions import DimensionError, DomainError

logger = logging.getLogger(__name__)

Matrix = NDArray[np.float64]
Vector = NDArray[np.float64]


def as_matrix(data: ArrayLike, name: str = "matrix") -> Matrix:
    """
    Convert input to a validated 2-D float64 matrix.

    Args:
        data: Nested sequence or array
        name: Name used in error messages

    Returns:
        A C-contiguous float64 copy of ``data``

    Raises:
        DimensionError: If the input is ragged, not 2-D, or empty
        DomainError: If any entry is NaN or infinite
    """
    try:
        arr = np.array(data, dtype=np.float64, order="C")
    except (TypeError, ValueError) as exc:
        raise DimensionError(name, "rectangular numeric rows", str(exc)) from exc

    if arr.ndim != 2:
        raise DimensionError(name, "2-D", f"{arr.ndim}-D")
    if arr.size == 0:
        raise DimensionError(name, "non-empty", arr.shape)
    if not np.all(np.isfinite(arr)):
        raise DomainError(name, "non-finite entry", "all entries must be finite")
    return arr


def as_vector(data: ArrayLike, name: str = "vector") -> Vector:
    """Convert input to a validated non-empty 1-D float64 vector."""
    arr = np.array(data, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(name, "1-D", f"{arr.ndim}-D")
    if arr.size == 0:
        raise DimensionError(name, "non-empty", 0)
    return arr


def row_softmax(m: ArrayLike) -> Matrix:
    """
    Softmax of every row, computed with max-subtraction.

    Args:
        m: N x M matrix of finite logits

    Returns:
        N x M matrix whose rows sum to 1
    """
    mat = as_matrix(m, "row_softmax input")
    return special.softmax(mat, axis=1)


def logsumexp(v: ArrayLike) -> float:
    """log(sum(exp(v))) with max-shift; exact for a single element."""
    vec = as_vector(v, "logsumexp input")
    if vec.size == 1:
        return float(vec[0])
    return float(special.logsumexp(vec))


def frobenius_dot(a: ArrayLike, b: ArrayLike) -> float:
    """Sum of the elementwise product of two equally shaped matrices."""
    left = np.asarray(a, dtype=np.float64)
    right = np.asarray(b, dtype=np.float64)
    if left.shape != right.shape:
        raise DimensionError("frobenius_dot", left.shape, right.shape)
    return float(np.sum(left * right))


def lse_rows(m: Matrix) -> Vector:
    """Row-wise logsumexp without validation (hot loop of log-domain Sinkhorn)."""
    peak = m.max(axis=1)
    return peak + np.log(np.exp(m - peak[:, None]).sum(axis=1))


def lse_cols(m: Matrix) -> Vector:
    """Column-wise logsumexp without validation."""
    peak = m.max(axis=0)
    return peak + np.log(np.exp(m - peak[None, :]).sum(axis=0))


def central_difference(
    fn: Callable[[NDArray[Any]], float],
    x: NDArray[np.float64],
    h: float = 1e-5,
) -> NDArray[np.float64]:
    """
    Centered finite-difference gradient of a scalar function.

    ``x`` is perturbed in place one entry at a time and restored exactly,
    so callers may pass arrays owned by a model.

    Args:
        fn: Scalar function of ``x``
        x: Point at which to differentiate (any shape)
        h: Step size (> 0)

    Returns:
        Array shaped like ``x``
    """
    if h <= 0:
        raise DomainError("h", h, "step must be positive")

    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    if not np.shares_memory(flat, x):
        raise DimensionError("central_difference", "contiguous array", "non-contiguous view")

    for k in range(flat.size):
        original = flat[k]
        flat[k] = original + h
        f_plus = fn(x)
        flat[k] = original - h
        f_minus = fn(x)
        flat[k] = original
        grad.reshape(-1)[k] = (f_plus - f_minus) / (2.0 * h)
    return grad


__all__ = [
    "Matrix",
    "Vector",
    "as_matrix",
    "as_vector",
    "row_softmax",
    "logsumexp",
    "frobenius_dot",
    "lse_rows",
    "lse_cols",
    "central_difference",
]
