"""
Sequence-level OT alignment losses and their frozen-plan gradients.

``ot_loss`` aligns two token sequences of arbitrary lengths: it builds the
cross-attention cost, solves Sinkhorn with uniform marginals and returns
``<T*, C>``. ``layer_ot_loss`` applies it to the embedding layer and to the
last hidden layer of a student/teacher pair.

Gradients follow the frozen-plan convention: T* is treated as a constant
and only the cost pathway C(X, Y, P) is differentiated. This is exactly
what ``finite_diff_check`` verifies, by perturbing inputs while keeping the
plan fixed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike

from otalign.core.cost import Projection, cost_matrix, projected_teacher
from otalign.core.numerics import Matrix, as_matrix, central_difference, row_softmax
from otalign.core.parallel import ParallelEvaluator
from otalign.core.transport import SinkhornConfig, TransportPlan, sinkhorn, uniform_measure
from otalign.exceptions import ConfigurationError, DimensionError, DomainError

logger = logging.getLogger(__name__)

LAYER_CHOICES = ("both", "embedding", "hidden")
GRAD_REL_TOL = 1e-4
GRAD_ABS_FLOOR = 1e-8


# =============================================================================
# Data Classes
# =============================================================================

@dataclass
class ReprBundle:
    """
    Embedding and last-hidden sequences one model produced for one input.

    Attributes:
        embeddings: T x d embedding rows
        hiddens: T x h last-hidden rows (h may differ from d)
        label: Tag recording which model/input produced it, e.g. "student/raw"
    """

    embeddings: Matrix
    hiddens: Matrix
    label: str = ""

    def __post_init__(self) -> None:
        self.embeddings = as_matrix(self.embeddings, f"{self.label or 'bundle'} embeddings")
        self.hiddens = as_matrix(self.hiddens, f"{self.label or 'bundle'} hiddens")
        if self.embeddings.shape[0] != self.hiddens.shape[0]:
            raise DimensionError(
                f"ReprBundle {self.label!r} row counts",
                self.embeddings.shape[0],
                self.hiddens.shape[0],
            )

    @property
    def length(self) -> int:
        return int(self.embeddings.shape[0])


@dataclass
class AlignReport:
    """Layer-wise alignment loss with its two components and plans."""

    loss: float
    emb_loss: float
    hid_loss: float
    emb_plan: Optional[TransportPlan]
    hid_plan: Optional[TransportPlan]
    config_echo: SinkhornConfig
    emb_projected: bool = False
    hid_projected: bool = False

    @property
    def converged(self) -> bool:
        """True when every plan that was solved converged."""
        plans = [p for p in (self.emb_plan, self.hid_plan) if p is not None]
        return all(p.converged for p in plans)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "loss": self.loss,
            "emb_loss": self.emb_loss,
            "hid_loss": self.hid_loss,
            "emb_projected": self.emb_projected,
            "hid_projected": self.hid_projected,
            "converged": self.converged,
            "config": self.config_echo.to_dict(),
        }


@dataclass
class GradCheckReport:
    """Outcome of comparing analytic and finite-difference gradients."""

    max_rel_err: float
    max_abs_err: float
    passed: bool
    h: float
    entries_checked: int
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "max_rel_err": self.max_rel_err,
            "max_abs_err": self.max_abs_err,
            "pass": self.passed,
            "h": self.h,
            "entries_checked": self.entries_checked,
        }


# =============================================================================
# Losses
# =============================================================================

def ot_loss(
    x: ArrayLike,
    y: ArrayLike,
    proj: Optional[Projection] = None,
    cfg: Optional[SinkhornConfig] = None,
) -> Tuple[float, TransportPlan]:
    """
    OT alignment loss between a student and a teacher sequence.

    Args:
        x: Student rows, N x d
        y: Teacher rows, M x D
        proj: Projection D x d (required when D != d)
        cfg: Sinkhorn settings

    Returns:
        (loss, plan) where loss = <plan, C>
    """
    cfg = cfg or SinkhornConfig()
    cost = cost_matrix(x, y, proj)
    n, m = cost.shape
    plan = sinkhorn(cost, uniform_measure(n), uniform_measure(m), cfg)
    return plan.cost, plan


def layer_ot_loss(
    s: ReprBundle,
    t: ReprBundle,
    proj_emb: Optional[Projection] = None,
    proj_hid: Optional[Projection] = None,
    cfg: Optional[SinkhornConfig] = None,
    layers: str = "both",
    max_workers: int = 1,
) -> AlignReport:
    """
    OT loss on the embedding layer plus the last hidden layer.

    Args:
        s: Student bundle
        t: Teacher bundle
        proj_emb: Projection for the embedding pair
        proj_hid: Projection for the hidden pair
        cfg: Sinkhorn settings
        layers: "both", or "embedding"/"hidden" to keep only one term
        max_workers: Solve the two layers concurrently when > 1

    Returns:
        AlignReport with loss = emb_loss + hid_loss
    """
    if layers not in LAYER_CHOICES:
        raise ConfigurationError("layers", f"must be one of {LAYER_CHOICES}, got {layers!r}")
    cfg = cfg or SinkhornConfig()

    tasks = []
    if layers in ("both", "embedding"):
        tasks.append(lambda: ot_loss(s.embeddings, t.embeddings, proj_emb, cfg))
    if layers in ("both", "hidden"):
        tasks.append(lambda: ot_loss(s.hiddens, t.hiddens, proj_hid, cfg))
    results = ParallelEvaluator(max_workers).run(tasks)

    emb_loss, emb_plan = (results.pop(0) if layers != "hidden" else (0.0, None))
    hid_loss, hid_plan = (results.pop(0) if layers != "embedding" else (0.0, None))

    return AlignReport(
        loss=emb_loss + hid_loss,
        emb_loss=emb_loss,
        hid_loss=hid_loss,
        emb_plan=emb_plan,
        hid_plan=hid_plan,
        config_echo=cfg,
        emb_projected=proj_emb is not None and layers != "hidden",
        hid_projected=proj_hid is not None and layers != "embedding",
    )


def frozen_plan_loss(
    x: ArrayLike,
    y: ArrayLike,
    proj: Optional[Projection],
    plan: TransportPlan,
) -> float:
    """<T, C(X, Y, P)> with the plan held fixed."""
    cost = cost_matrix(x, y, proj)
    if cost.shape != plan.plan.shape:
        raise DimensionError("frozen_plan_loss", plan.plan.shape, cost.shape)
    return float(np.sum(plan.plan * cost))


# =============================================================================
# Frozen-plan gradients
# =============================================================================

def grad_wrt_cost(plan: TransportPlan) -> Matrix:
    """d<T, C>/dC with T frozen is the plan itself."""
    return plan.plan.copy()


def _score_grad(x: ArrayLike, y: ArrayLike, proj: Optional[Projection], plan: TransportPlan):
    """Gradient of the frozen-plan loss w.r.t. the scaled scores S, plus forward pieces."""
    xm = as_matrix(x, "student representations")
    ym = as_matrix(y, "teacher representations")
    d = xm.shape[1]
    q = projected_teacher(ym, proj, d)
    if plan.plan.shape != (xm.shape[0], ym.shape[0]):
        raise DimensionError("plan", (xm.shape[0], ym.shape[0]), plan.plan.shape)

    attn = row_softmax((xm @ q.T) / math.sqrt(d))
    # C = 1 - A, so dL/dA = -T; then the row-wise softmax Jacobian
    g_attn = -plan.plan
    g_scores = attn * (g_attn - np.sum(g_attn * attn, axis=1, keepdims=True))
    return g_scores, xm, ym, q, math.sqrt(d)


def grad_wrt_student(
    x: ArrayLike,
    y: ArrayLike,
    proj: Optional[Projection],
    plan: TransportPlan,
) -> Matrix:
    """dL/dX (N x d) with the plan frozen."""
    g_scores, _, _, q, scale = _score_grad(x, y, proj, plan)
    return g_scores @ q / scale


def grad_wrt_teacher(
    x: ArrayLike,
    y: ArrayLike,
    proj: Optional[Projection],
    plan: TransportPlan,
) -> Matrix:
    """dL/dY (M x D) with the plan frozen."""
    g_scores, xm, _, _, scale = _score_grad(x, y, proj, plan)
    g_q = g_scores.T @ xm / scale
    return g_q if proj is None else g_q @ proj.weights.T


def grad_wrt_projection(
    x: ArrayLike,
    y: ArrayLike,
    proj: Projection,
    plan: TransportPlan,
) -> Matrix:
    """dL/dP (D x d) with the plan frozen."""
    g_scores, xm, ym, _, scale = _score_grad(x, y, proj, plan)
    g_q = g_scores.T @ xm / scale
    return ym.T @ g_q


def compare_gradients(
    analytic: np.ndarray,
    numeric: np.ndarray,
    rel_tol: float = GRAD_REL_TOL,
    abs_floor: float = GRAD_ABS_FLOOR,
) -> Tuple[float, float, bool]:
    """
    Compare two gradients entrywise.

    Entries with |analytic| >= abs_floor are compared relatively against
    rel_tol; smaller entries are compared absolutely against abs_floor.

    Returns:
        (max relative error, max absolute error on small entries, passed)
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if analytic.shape != numeric.shape:
        raise DimensionError("compare_gradients", analytic.shape, numeric.shape)

    diff = np.abs(numeric - analytic)
    big = np.abs(analytic) >= abs_floor
    max_rel = float((diff[big] / np.abs(analytic[big])).max()) if np.any(big) else 0.0
    max_abs = float(diff[~big].max()) if np.any(~big) else 0.0
    passed = bool(np.isfinite(max_rel) and max_rel <= rel_tol and max_abs <= abs_floor)
    return max_rel, max_abs, passed


def finite_diff_check(
    x: ArrayLike,
    y: ArrayLike,
    proj: Optional[Projection] = None,
    cfg: Optional[SinkhornConfig] = None,
    h: float = 1e-5,
) -> GradCheckReport:
    """
    Check grad_wrt_student against central differences of the frozen-plan loss.

    A coarse ``h`` may legitimately fail; the report is well-formed either way.
    """
    if h <= 0:
        raise DomainError("h", h, "step must be positive")

    xm = as_matrix(x, "student representations")
    _, plan = ot_loss(xm, y, proj, cfg)
    analytic = grad_wrt_student(xm, y, proj, plan)

    probe = xm.copy()
    numeric = central_difference(lambda z: frozen_plan_loss(z, y, proj, plan), probe, h)
    max_rel, max_abs, passed = compare_gradients(analytic, numeric)

    logger.info("Gradient check: max_rel_err=%.3e max_abs_err=%.3e pass=%s", max_rel, max_abs, passed)
    return GradCheckReport(
        max_rel_err=max_rel,
        max_abs_err=max_abs,
        passed=passed,
        h=h,
        entries_checked=int(analytic.size),
        details={"plan_converged": plan.converged},
    )


__all__ = [
    "ReprBundle",
    "AlignReport",
    "GradCheckReport",
    "ot_loss",
    "layer_ot_loss",
    "frozen_plan_loss",
    "grad_wrt_cost",
    "grad_wrt_student",
    "grad_wrt_teacher",
    "grad_wrt_projection",
    "compare_gradients",
    "finite_diff_check",
]
