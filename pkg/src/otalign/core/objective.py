"""
Cross-CoT alignment losses, CE/KL distillation terms and the total objective.

Each side of a distillation pair yields two representation bundles: one
for the raw input/response and one for its chain-of-thought variant.
Pairing them across student and teacher gives

    cst  = L(s_cot, t_cot) + L(s_raw, t_raw)     student-teacher alignment
    crc  = L(s_raw, t_cot) + L(s_cot, t_raw)     raw/CoT cross alignment
    ccot = crc + cst

where L is the layer-wise OT loss. The training objective mixes it with
cross-entropy and an optional logit KD term:

    total = (1 - alpha) * ce + alpha * (ccot + kd)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike
from scipy import special

from otalign.core.alignment import (
    AlignReport,
    ReprBundle,
    frozen_plan_loss,
    grad_wrt_projection,
    grad_wrt_student,
    layer_ot_loss,
)
from otalign.core.cost import Projection
from otalign.core.numerics import Matrix, as_matrix
from otalign.core.parallel import ParallelEvaluator
from otalign.core.transport import SinkhornConfig
from otalign.exceptions import ConfigurationError, DimensionError, DomainError, TokenIndexError

logger = logging.getLogger(__name__)

PAIR_NAMES = ("st_cot", "st_raw", "rc_raw_cot", "rc_cot_raw")
STUDENT_SIDE = {"st_cot": "s_cot", "st_raw": "s_raw", "rc_raw_cot": "s_raw", "rc_cot_raw": "s_cot"}


# =============================================================================
# Data Classes
# =============================================================================

@dataclass
class CoTQuad:
    """Raw and CoT representation bundles for a student and a teacher."""

    s_raw: ReprBundle
    s_cot: ReprBundle
    t_raw: ReprBundle
    t_cot: ReprBundle

    def __post_init__(self) -> None:
        for side, a, b in (("student", self.s_raw, self.s_cot), ("teacher", self.t_raw, self.t_cot)):
            if a.embeddings.shape[1] != b.embeddings.shape[1]:
                raise DimensionError(f"{side} embedding width", a.embeddings.shape[1], b.embeddings.shape[1])
            if a.hiddens.shape[1] != b.hiddens.shape[1]:
                raise DimensionError(f"{side} hidden width", a.hiddens.shape[1], b.hiddens.shape[1])

    def pair(self, name: str) -> Tuple[ReprBundle, ReprBundle]:
        """(student, teacher) bundles of one of the four named pairs."""
        return {
            "st_cot": (self.s_cot, self.t_cot),
            "st_raw": (self.s_raw, self.t_raw),
            "rc_raw_cot": (self.s_raw, self.t_cot),
            "rc_cot_raw": (self.s_cot, self.t_raw),
        }[name]

    def swapped_student(self) -> "CoTQuad":
        """The same quad with the student's raw and CoT bundles exchanged."""
        return CoTQuad(s_raw=self.s_cot, s_cot=self.s_raw, t_raw=self.t_raw, t_cot=self.t_cot)


@dataclass
class ProjectionSet:
    """Teacher-to-student projections for the embedding and hidden layers."""

    embedding: Optional[Projection] = None
    hidden: Optional[Projection] = None

    def copy(self) -> "ProjectionSet":
        return ProjectionSet(
            embedding=self.embedding.copy() if self.embedding is not None else None,
            hidden=self.hidden.copy() if self.hidden is not None else None,
        )


@dataclass
class ObjectiveConfig:
    """
    Settings for the combined distillation objective.

    Attributes:
        alpha: Weight of the alignment terms against cross-entropy, in [0, 1]
        sinkhorn: Solver settings for every OT pair
        projections: Optional teacher-to-student projections
        temperature: Softening temperature of the KL term
        use_cst: Include the student-teacher pairs
        use_crc: Include the raw/CoT cross pairs
        layers: "both", "embedding" or "hidden"
        max_workers: Evaluate the four pairs on a thread pool when > 1
    """

    alpha: float = 0.5
    sinkhorn: SinkhornConfig = field(default_factory=SinkhornConfig)
    projections: ProjectionSet = field(default_factory=ProjectionSet)
    temperature: float = 1.0
    use_cst: bool = True
    use_crc: bool = True
    layers: str = "both"
    max_workers: int = 1

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError("alpha", f"must lie in [0, 1], got {self.alpha}")
        if not self.temperature > 0:
            raise ConfigurationError("temperature", f"must be > 0, got {self.temperature}")
        if self.layers not in ("both", "embedding", "hidden"):
            raise ConfigurationError("layers", f"must be both, embedding or hidden, got {self.layers!r}")
        if self.max_workers < 1:
            raise ConfigurationError("max_workers", f"must be >= 1, got {self.max_workers}")


@dataclass
class CCoTReport:
    """
    Per-pair breakdown of the cross-CoT loss.

    Pairs disabled by ``use_cst``/``use_crc`` are None and contribute 0.
    """

    pairs: Dict[str, Optional[AlignReport]]
    cst: float
    crc: float
    total: float
    emb: float
    hid: float

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.pairs.values() if r is not None)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ccot": self.total,
            "cst": self.cst,
            "crc": self.crc,
            "emb_ot": self.emb,
            "hid_ot": self.hid,
            "converged": self.converged,
            "pairs": {name: (r.to_dict() if r is not None else None) for name, r in self.pairs.items()},
        }


# =============================================================================
# Cross-CoT losses
# =============================================================================

def _pair_losses(q: CoTQuad, cfg: ObjectiveConfig, names: List[str]) -> Dict[str, AlignReport]:
    proj = cfg.projections
    tasks = []
    for name in names:
        s, t = q.pair(name)
        tasks.append(
            lambda s=s, t=t: layer_ot_loss(
                s, t, proj.embedding, proj.hidden, cfg.sinkhorn, layers=cfg.layers
            )
        )
    return dict(zip(names, ParallelEvaluator(cfg.max_workers).run(tasks)))


def ccot_breakdown(q: CoTQuad, cfg: Optional[ObjectiveConfig] = None) -> CCoTReport:
    """
    Evaluate the enabled pairs once and assemble cst, crc and their sum.

    Args:
        q: Student/teacher raw and CoT bundles
        cfg: Objective settings (ablation switches, projections, solver)

    Returns:
        CCoTReport with total == crc + cst
    """
    cfg = cfg or ObjectiveConfig()
    names = []
    if cfg.use_cst:
        names += ["st_cot", "st_raw"]
    if cfg.use_crc:
        names += ["rc_raw_cot", "rc_cot_raw"]
    solved = _pair_losses(q, cfg, names)
    pairs: Dict[str, Optional[AlignReport]] = {name: solved.get(name) for name in PAIR_NAMES}

    cst = solved["st_cot"].loss + solved["st_raw"].loss if cfg.use_cst else 0.0
    crc = solved["rc_raw_cot"].loss + solved["rc_cot_raw"].loss if cfg.use_crc else 0.0
    emb = sum(r.emb_loss for r in solved.values())
    hid = sum(r.hid_loss for r in solved.values())

    report = CCoTReport(pairs=pairs, cst=cst, crc=crc, total=crc + cst, emb=emb, hid=hid)
    if not report.converged:
        logger.warning("Cross-CoT loss computed from non-converged plans")
    return report


def cross_st_loss(q: CoTQuad, cfg: Optional[ObjectiveConfig] = None) -> float:
    """L(s_cot, t_cot) + L(s_raw, t_raw)."""
    cfg = cfg or ObjectiveConfig()
    solved = _pair_losses(q, cfg, ["st_cot", "st_raw"])
    return solved["st_cot"].loss + solved["st_raw"].loss


def cross_rc_loss(q: CoTQuad, cfg: Optional[ObjectiveConfig] = None) -> float:
    """L(s_raw, t_cot) + L(s_cot, t_raw)."""
    cfg = cfg or ObjectiveConfig()
    solved = _pair_losses(q, cfg, ["rc_raw_cot", "rc_cot_raw"])
    return solved["rc_raw_cot"].loss + solved["rc_cot_raw"].loss


def ccot_loss(q: CoTQuad, cfg: Optional[ObjectiveConfig] = None) -> float:
    """cross_rc_loss + cross_st_loss."""
    return cross_rc_loss(q, cfg) + cross_st_loss(q, cfg)


def ot_kd_loss(q: CoTQuad, cfg: Optional[ObjectiveConfig] = None) -> float:
    """
    Raw-pair OT loss plus the four raw/CoT cross terms.

    The cross terms over embedding and hidden layers are exactly the
    cross_rc pairs, so this equals L(s_raw, t_raw) + cross_rc_loss.
    """
    cfg = cfg or ObjectiveConfig()
    solved = _pair_losses(q, cfg, ["st_raw"])
    return solved["st_raw"].loss + cross_rc_loss(q, cfg)


@dataclass
class CCoTGrads:
    """Frozen-plan gradients of the cross-CoT loss."""

    student: Dict[str, Tuple[Matrix, Matrix]]
    proj_embedding: Optional[Matrix] = None
    proj_hidden: Optional[Matrix] = None


def ccot_gradients(q: CoTQuad, report: CCoTReport, cfg: Optional[ObjectiveConfig] = None) -> CCoTGrads:
    """
    Gradients of ``report.total`` w.r.t. the student bundles and projections.

    Plans are taken from ``report`` and held fixed.

    Returns:
        CCoTGrads with student["s_raw"/"s_cot"] = (d/d embeddings, d/d hiddens)
    """
    cfg = cfg or ObjectiveConfig()
    proj = cfg.projections
    grads = {
        "s_raw": (np.zeros_like(q.s_raw.embeddings), np.zeros_like(q.s_raw.hiddens)),
        "s_cot": (np.zeros_like(q.s_cot.embeddings), np.zeros_like(q.s_cot.hiddens)),
    }
    g_pe = np.zeros_like(proj.embedding.weights) if proj.embedding is not None else None
    g_ph = np.zeros_like(proj.hidden.weights) if proj.hidden is not None else None

    for name, pair_report in report.pairs.items():
        if pair_report is None:
            continue
        s, t = q.pair(name)
        key = STUDENT_SIDE[name]
        g_emb, g_hid = grads[key]
        if pair_report.emb_plan is not None:
            g_emb += grad_wrt_student(s.embeddings, t.embeddings, proj.embedding, pair_report.emb_plan)
            if g_pe is not None:
                g_pe += grad_wrt_projection(s.embeddings, t.embeddings, proj.embedding, pair_report.emb_plan)
        if pair_report.hid_plan is not None:
            g_hid += grad_wrt_student(s.hiddens, t.hiddens, proj.hidden, pair_report.hid_plan)
            if g_ph is not None:
                g_ph += grad_wrt_projection(s.hiddens, t.hiddens, proj.hidden, pair_report.hid_plan)

    return CCoTGrads(student=grads, proj_embedding=g_pe, proj_hidden=g_ph)


def ccot_frozen_loss(q: CoTQuad, report: CCoTReport, cfg: Optional[ObjectiveConfig] = None) -> float:
    """Cross-CoT loss of ``q`` evaluated with the plans of ``report`` held fixed."""
    cfg = cfg or ObjectiveConfig()
    proj = cfg.projections

    def pair_value(name: str) -> float:
        pair_report = report.pairs[name]
        if pair_report is None:
            return 0.0
        s, t = q.pair(name)
        value = 0.0
        if pair_report.emb_plan is not None:
            value += frozen_plan_loss(s.embeddings, t.embeddings, proj.embedding, pair_report.emb_plan)
        if pair_report.hid_plan is not None:
            value += frozen_plan_loss(s.hiddens, t.hiddens, proj.hidden, pair_report.hid_plan)
        return value

    cst = pair_value("st_cot") + pair_value("st_raw")
    crc = pair_value("rc_raw_cot") + pair_value("rc_cot_raw")
    return crc + cst


# =============================================================================
# Logit losses
# =============================================================================

def _targets(targets: ArrayLike, rows: int, vocab: int) -> np.ndarray:
    idx = np.asarray(targets)
    if idx.ndim != 1 or idx.size != rows:
        raise DimensionError("targets", rows, idx.shape)
    if idx.size and not np.issubdtype(idx.dtype, np.integer):
        raise DimensionError("targets", "integer ids", idx.dtype)
    bad = np.flatnonzero((idx < 0) | (idx >= vocab))
    if bad.size:
        raise TokenIndexError(int(idx[bad[0]]), vocab, f"target position {int(bad[0])}")
    return idx.astype(np.intp)


def ce_loss(logits: ArrayLike, targets: ArrayLike) -> float:
    """Mean over positions of -log softmax(logits_t)[target_t]."""
    z = as_matrix(logits, "logits")
    idx = _targets(targets, z.shape[0], z.shape[1])
    log_p = special.log_softmax(z, axis=1)
    return float(-log_p[np.arange(z.shape[0]), idx].mean())


def ce_loss_grad(logits: ArrayLike, targets: ArrayLike) -> Matrix:
    """d ce_loss / d logits = (softmax - onehot) / T."""
    z = as_matrix(logits, "logits")
    idx = _targets(targets, z.shape[0], z.shape[1])
    grad = special.softmax(z, axis=1)
    grad[np.arange(z.shape[0]), idx] -= 1.0
    return grad / z.shape[0]


def _kl_inputs(student_logits: ArrayLike, teacher_logits: ArrayLike, temperature: float):
    zs = as_matrix(student_logits, "student logits")
    zt = as_matrix(teacher_logits, "teacher logits")
    if zs.shape != zt.shape:
        raise DimensionError("kl_kd_loss logits", zt.shape, zs.shape)
    if not temperature > 0:
        raise DomainError("temperature", temperature, "must be > 0")
    return zs, zt


def kl_kd_loss(student_logits: ArrayLike, teacher_logits: ArrayLike, temperature: float = 1.0) -> float:
    """
    Mean over positions of KL(softmax(teacher/tau) || softmax(student/tau)) * tau^2.
    """
    zs, zt = _kl_inputs(student_logits, teacher_logits, temperature)
    log_ps = special.log_softmax(zs / temperature, axis=1)
    log_pt = special.log_softmax(zt / temperature, axis=1)
    kl = np.sum(np.exp(log_pt) * (log_pt - log_ps), axis=1)
    # rounding can leave identical rows a hair below zero
    return max(float(kl.mean()) * temperature**2, 0.0)


def kl_kd_loss_grad(student_logits: ArrayLike, teacher_logits: ArrayLike, temperature: float = 1.0) -> Matrix:
    """d kl_kd_loss / d student_logits = tau * (p_s - p_t) / T."""
    zs, zt = _kl_inputs(student_logits, teacher_logits, temperature)
    ps = special.softmax(zs / temperature, axis=1)
    pt = special.softmax(zt / temperature, axis=1)
    return temperature * (ps - pt) / zs.shape[0]


# =============================================================================
# Total objective
# =============================================================================

def total_objective(ce: float, kd: float, ccot: float, alpha: float) -> float:
    """
    (1 - alpha) * ce + alpha * (ccot + kd).

    Raises:
        DomainError: If alpha lies outside [0, 1]
    """
    if not 0.0 <= alpha <= 1.0:
        raise DomainError("alpha", alpha, "must lie in [0, 1]")
    return (1.0 - alpha) * ce + alpha * (ccot + kd)


__all__ = [
    "CoTQuad",
    "ProjectionSet",
    "ObjectiveConfig",
    "CCoTReport",
    "CCoTGrads",
    "cross_st_loss",
    "cross_rc_loss",
    "ccot_loss",
    "ccot_breakdown",
    "ccot_gradients",
    "ccot_frozen_loss",
    "ot_kd_loss",
    "ce_loss",
    "ce_loss_grad",
    "kl_kd_loss",
    "kl_kd_loss_grad",
    "total_objective",
]
