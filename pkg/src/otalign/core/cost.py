"""
Cross-attention cost between student and teacher token representations.

Student rows X (N x d) are compared with teacher rows Y (M x D). When the
hidden sizes differ the teacher is first mapped into the student space by
a projection P (D x d). Similarities are scaled dot products

    S = X (Y P)^T / sqrt(d)

normalized with a softmax over teacher tokens, and the cost is
``C = 1 - softmax(S)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike

from otalign.core.numerics import Matrix, as_matrix, row_softmax
from otalign.exceptions import DimensionError

logger = logging.getLogger(__name__)

_BELOW_ONE = np.nextafter(1.0, 0.0)


@dataclass
class Projection:
    """Linear map from teacher space (D) to student space (d)."""

    weights: Matrix
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        self.weights = as_matrix(self.weights, "projection")

    @property
    def in_dim(self) -> int:
        """Teacher dimension D."""
        return int(self.weights.shape[0])

    @property
    def out_dim(self) -> int:
        """Student dimension d."""
        return int(self.weights.shape[1])

    def copy(self) -> "Projection":
        return Projection(self.weights.copy(), self.seed)


def init_projection(teacher_dim: int, student_dim: int, seed: int) -> Projection:
    """
    Draw a D x d projection uniformly from [-b, b], b = sqrt(6 / (D + d)).

    The same (D, d, seed) always yields a bit-identical matrix.
    """
    if teacher_dim < 1 or student_dim < 1:
        raise DimensionError("init_projection", "D >= 1 and d >= 1", (teacher_dim, student_dim))
    bound = math.sqrt(6.0 / (teacher_dim + student_dim))
    rng = np.random.default_rng(seed)
    weights = rng.uniform(-bound, bound, size=(teacher_dim, student_dim))
    return Projection(weights, seed)


def projected_teacher(y: Matrix, proj: Optional[Projection], student_dim: int) -> Matrix:
    """Teacher rows expressed in the student space (Y P, or Y when dims agree)."""
    if proj is None:
        if y.shape[1] != student_dim:
            raise DimensionError(
                "similarity (teacher dim differs from student dim; a projection is required)",
                student_dim,
                y.shape[1],
            )
        return y
    if proj.in_dim != y.shape[1] or proj.out_dim != student_dim:
        raise DimensionError("projection", (y.shape[1], student_dim), proj.weights.shape)
    return y @ proj.weights


def similarity(x: ArrayLike, y: ArrayLike, proj: Optional[Projection] = None) -> Matrix:
    """
    Scaled dot-product similarity S = X Q^T / sqrt(d), Q = Y P or Y.

    Args:
        x: Student representations, N x d
        y: Teacher representations, M x D
        proj: Optional D x d projection (required when D != d)

    Returns:
        N x M similarity matrix
    """
    xm = as_matrix(x, "student representations")
    ym = as_matrix(y, "teacher representations")
    d = xm.shape[1]
    q = projected_teacher(ym, proj, d)
    return (xm @ q.T) / math.sqrt(d)


def attention_cost(s: ArrayLike) -> Matrix:
    """
    C = 1 - row_softmax(S); entries in [0, 1) and each row sums to M - 1.

    A weight that underflows to zero would give exactly 1, so entries are
    capped at the largest double below 1.
    """
    return np.minimum(1.0 - row_softmax(s), _BELOW_ONE)


def cost_matrix(x: ArrayLike, y: ArrayLike, proj: Optional[Projection] = None) -> Matrix:
    """Cross-attention cost between student rows and teacher rows."""
    return attention_cost(similarity(x, y, proj))


__all__ = [
    "Projection",
    "init_projection",
    "projected_teacher",
    "similarity",
    "attention_cost",
    "cost_matrix",
]
