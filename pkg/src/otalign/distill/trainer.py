"""
Desk-scale distillation runs.

A teacher ToyLM is pre-trained with cross-entropy on the copy task under
its own tokenizer, then frozen. A fresh student is trained by plain
gradient descent on

    (1 - alpha) * ce + alpha * (ccot + kd)

where ``ce`` mixes the raw and CoT responses, ``ccot`` aligns the
student's response representations with the teacher's through OT (plans
frozen for the gradient), and ``kd`` is a logit KL term that only exists
when both sides share a tokenizer.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, replace
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from otalign.caching import TeacherCache
from otalign.core.alignment import ReprBundle
from otalign.core.cost import init_projection
from otalign.core.numerics import Matrix
from otalign.core.objective import (
    CCoTReport,
    CoTQuad,
    ObjectiveConfig,
    ProjectionSet,
    ccot_breakdown,
    ccot_frozen_loss,
    ccot_gradients,
    ce_loss,
    ce_loss_grad,
    kl_kd_loss,
    kl_kd_loss_grad,
    total_objective,
)
from otalign.core.parallel import ParallelEvaluator
from otalign.core.transport import SinkhornConfig
from otalign.distill.data import Sample, dataset_corpus, make_copy_dataset
from otalign.distill.model import ToyLM, ToyLMGrads, apply_gradients, backward, forward, init_toy_lm
from otalign.distill.tokenizers import TOKENIZER_KINDS, ToyTokenizer, make_tokenizer
from otalign.exceptions import ConfigurationError, DomainError
from otalign.monitoring import StepRecord, TrainingLog, TrainingMonitor

logger = logging.getLogger(__name__)

TEACHER_SEED_OFFSET = 1000


# =============================================================================
# Configuration
# =============================================================================

@dataclass
class TrainConfig:
    """
    Settings of one distillation run.

    Attributes:
        steps: Optimizer steps
        lr: Student learning rate
        alpha: Weight of the alignment terms
        lam: Sinkhorn regularization strength
        seed: Seed for the student, projections and batch order
        batch: Samples per step
        dataset_size: Samples generated when no dataset is supplied
        transform: Copy-task transformation ("copy" or "reverse")
        student_tokenizer: "char" or "pair"
        teacher_tokenizer: "char" or "pair"
        num_merges: Merges learned by pair tokenizers
        student_embed_dim: Student embedding width d
        student_hidden_dim: Student hidden width h
        teacher_embed_dim: Teacher embedding width D
        teacher_hidden_dim: Teacher hidden width
        init_scale: Std of the embedding initialization
        teacher_steps: CE pre-training steps for the teacher
        teacher_lr: Teacher learning rate
        cot_ratio: Weight of CoT samples relative to raw ones in CE
        use_cot_data: Train on CoT samples at all
        use_cst: Include the student-teacher alignment pairs
        use_crc: Include the raw/CoT cross pairs
        layers: "both", "embedding" or "hidden"
        temperature: KD softening temperature
        sinkhorn_tol: Marginal tolerance during training
        sinkhorn_max_iters: Iteration cap during training
        log_domain: Log-domain Sinkhorn
        train_projections: Update projections with the student
        proj_lr: Projection learning rate
        max_workers: Threads for the four OT pairs of a sample
    """

    steps: int = 2000
    lr: float = 0.2
    alpha: float = 0.5
    lam: float = 50.0
    seed: int = 0
    batch: int = 2
    dataset_size: int = 64
    transform: str = "copy"
    student_tokenizer: str = "char"
    teacher_tokenizer: str = "pair"
    num_merges: int = 24
    student_embed_dim: int = 8
    student_hidden_dim: int = 16
    teacher_embed_dim: int = 12
    teacher_hidden_dim: int = 24
    init_scale: float = 0.5
    teacher_steps: int = 600
    teacher_lr: float = 0.5
    cot_ratio: float = 1.0
    use_cot_data: bool = True
    use_cst: bool = True
    use_crc: bool = True
    layers: str = "both"
    temperature: float = 1.0
    sinkhorn_tol: float = 1e-6
    sinkhorn_max_iters: int = 1000
    log_domain: bool = True
    train_projections: bool = True
    proj_lr: float = 1.0
    max_workers: int = 1

    def __post_init__(self) -> None:
        errors = self.validate()
        if errors:
            raise ConfigurationError("train", "; ".join(errors))

    def validate(self) -> List[str]:
        """Return a list of constraint violations."""
        errors = []
        if self.steps < 1:
            errors.append(f"steps must be >= 1, got {self.steps}")
        if not self.lr > 0:
            errors.append(f"lr must be > 0, got {self.lr}")
        if not 0.0 <= self.alpha <= 1.0:
            errors.append(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.batch < 1:
            errors.append(f"batch must be >= 1, got {self.batch}")
        if self.cot_ratio < 0:
            errors.append(f"cot_ratio must be >= 0, got {self.cot_ratio}")
        if self.teacher_steps < 0:
            errors.append(f"teacher_steps must be >= 0, got {self.teacher_steps}")
        if not self.teacher_lr > 0:
            errors.append(f"teacher_lr must be > 0, got {self.teacher_lr}")
        if not self.proj_lr > 0:
            errors.append(f"proj_lr must be > 0, got {self.proj_lr}")
        for name in ("student_tokenizer", "teacher_tokenizer"):
            if getattr(self, name) not in TOKENIZER_KINDS:
                errors.append(f"{name} must be one of {TOKENIZER_KINDS}")
        return errors

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        data = asdict(self)
        data["lambda"] = data.pop("lam")
        return data

    def sinkhorn_config(self) -> SinkhornConfig:
        return SinkhornConfig(
            lam=self.lam,
            max_iters=self.sinkhorn_max_iters,
            tol=self.sinkhorn_tol,
            log_domain=self.log_domain,
        )

    def objective_config(self, projections: Optional[ProjectionSet] = None) -> ObjectiveConfig:
        return ObjectiveConfig(
            alpha=self.alpha,
            sinkhorn=self.sinkhorn_config(),
            projections=projections or ProjectionSet(),
            temperature=self.temperature,
            use_cst=self.use_cst,
            use_crc=self.use_crc,
            layers=self.layers,
            max_workers=self.max_workers,
        )

    def mix_weights(self) -> Tuple[float, float]:
        """CE weights of the raw and CoT responses."""
        if not self.use_cot_data:
            return 1.0, 0.0
        return 1.0 / (1.0 + self.cot_ratio), self.cot_ratio / (1.0 + self.cot_ratio)

    def teacher_settings(self, tokenizer: ToyTokenizer, dataset: Sequence[Sample]) -> Dict[str, Any]:
        """Everything teacher pre-training depends on (the teacher cache key)."""
        return {
            "tokenizer": tokenizer.to_dict(),
            "dataset": [s.to_dict() for s in dataset],
            "dims": [self.teacher_embed_dim, self.teacher_hidden_dim],
            "seed": self.seed,
            "init_scale": self.init_scale,
            "steps": self.teacher_steps,
            "lr": self.teacher_lr,
            "batch": self.batch,
            "cot_ratio": self.cot_ratio,
        }


# =============================================================================
# Per-sample objective
# =============================================================================

@dataclass
class EncodedSample:
    """Token ids of a sample's raw and CoT sequences under one tokenizer."""

    raw_ids: List[int]
    raw_prompt: int
    cot_ids: List[int]
    cot_prompt: int

    def sequence(self, key: str) -> Tuple[List[int], int]:
        if key == "raw":
            return self.raw_ids, self.raw_prompt
        return self.cot_ids, self.cot_prompt


def encode_sample(tokenizer: ToyTokenizer, sample: Sample) -> EncodedSample:
    """Encode prompt and response separately and concatenate."""
    x, y = tokenizer.encode(sample.x), tokenizer.encode(sample.y)
    xc, yc = tokenizer.encode(sample.x_cot), tokenizer.encode(sample.y_cot)
    return EncodedSample(raw_ids=x + y, raw_prompt=len(x), cot_ids=xc + yc, cot_prompt=len(xc))


@dataclass
class TeacherView:
    """Frozen teacher outputs on the response positions of one sample."""

    raw: ReprBundle
    cot: ReprBundle
    logits: Dict[str, Matrix]


def teacher_view(model: ToyLM, enc: EncodedSample) -> TeacherView:
    bundles = {}
    logits = {}
    for key in ("raw", "cot"):
        ids, p = enc.sequence(key)
        emb, hid, z = forward(model, ids)
        bundles[key] = ReprBundle(emb[p:], hid[p:], f"teacher/{key}")
        logits[key] = z[p - 1:len(ids) - 1]
    return TeacherView(raw=bundles["raw"], cot=bundles["cot"], logits=logits)


@dataclass
class SampleResult:
    """Loss components, parameter gradients and plans for one sample."""

    ce: float
    kd: Optional[float]
    ccot: Optional[float]
    emb_ot: Optional[float]
    hid_ot: Optional[float]
    total: float
    grads: Optional[ToyLMGrads] = None
    proj_grads: Tuple[Optional[Matrix], Optional[Matrix]] = (None, None)
    report: Optional[CCoTReport] = None


def sample_objective(
    student: ToyLM,
    enc: EncodedSample,
    teacher: Optional[TeacherView],
    cfg: TrainConfig,
    obj_cfg: ObjectiveConfig,
    kd_enabled: bool = False,
    frozen: Optional[CCoTReport] = None,
    with_grads: bool = True,
) -> SampleResult:
    """
    Objective of one sample and its gradient w.r.t. the student.

    Args:
        student: Model being trained
        enc: Student-tokenized sample
        teacher: Frozen teacher outputs (unused when alpha == 0)
        cfg: Run settings (alpha, CE mixing)
        obj_cfg: Alignment settings including projections
        kd_enabled: Add the logit KL term (requires a shared tokenizer)
        frozen: Evaluate the alignment term with these plans instead of solving
        with_grads: Also run the backward pass

    Returns:
        SampleResult; kd/ccot/emb_ot/hid_ot are None when alpha == 0
    """
    alpha = cfg.alpha
    w_raw, w_cot = cfg.mix_weights()
    keys = ["raw", "cot"] if (w_cot > 0 or alpha > 0) else ["raw"]
    weights = {"raw": w_raw, "cot": w_cot}

    outputs = {key: forward(student, enc.sequence(key)[0]) for key in keys}
    upstream = {key: [np.zeros_like(arr) for arr in outputs[key]] for key in keys}

    ce = 0.0
    for key in keys:
        if weights[key] == 0:
            continue
        ids, p = enc.sequence(key)
        rows = slice(p - 1, len(ids) - 1)
        logits = outputs[key][2][rows]
        ce += weights[key] * ce_loss(logits, ids[p:])
        if with_grads:
            upstream[key][2][rows] += (1.0 - alpha) * weights[key] * ce_loss_grad(logits, ids[p:])

    kd = ccot = emb_ot = hid_ot = None
    report = None
    proj_grads: Tuple[Optional[Matrix], Optional[Matrix]] = (None, None)
    if alpha > 0:
        if teacher is None:
            raise ConfigurationError("teacher", "alpha > 0 needs teacher outputs")
        kd = 0.0
        if kd_enabled:
            for key in keys:
                if weights[key] == 0:
                    continue
                ids, p = enc.sequence(key)
                rows = slice(p - 1, len(ids) - 1)
                logits = outputs[key][2][rows]
                kd += weights[key] * kl_kd_loss(logits, teacher.logits[key], obj_cfg.temperature)
                if with_grads:
                    upstream[key][2][rows] += (
                        alpha * weights[key] * kl_kd_loss_grad(logits, teacher.logits[key], obj_cfg.temperature)
                    )

        prompts = {key: enc.sequence(key)[1] for key in keys}
        quad = CoTQuad(
            s_raw=ReprBundle(outputs["raw"][0][prompts["raw"]:], outputs["raw"][1][prompts["raw"]:], "student/raw"),
            s_cot=ReprBundle(outputs["cot"][0][prompts["cot"]:], outputs["cot"][1][prompts["cot"]:], "student/cot"),
            t_raw=teacher.raw,
            t_cot=teacher.cot,
        )
        if frozen is None:
            report = ccot_breakdown(quad, obj_cfg)
            ccot, emb_ot, hid_ot = report.total, report.emb, report.hid
        else:
            report = frozen
            ccot = ccot_frozen_loss(quad, frozen, obj_cfg)
            emb_ot, hid_ot = frozen.emb, frozen.hid

        if with_grads:
            g = ccot_gradients(quad, report, obj_cfg)
            for key, name in (("raw", "s_raw"), ("cot", "s_cot")):
                g_emb, g_hid = g.student[name]
                upstream[key][0][prompts[key]:] += alpha * g_emb
                upstream[key][1][prompts[key]:] += alpha * g_hid
            proj_grads = (
                alpha * g.proj_embedding if g.proj_embedding is not None else None,
                alpha * g.proj_hidden if g.proj_hidden is not None else None,
            )

    total = total_objective(ce, kd or 0.0, ccot or 0.0, alpha)

    grads = None
    if with_grads:
        grads = ToyLMGrads.zeros_like(student)
        for key in keys:
            g_e, g_h, g_z = upstream[key]
            grads.add_(backward(student, enc.sequence(key)[0], g_e, g_h, g_z))

    return SampleResult(
        ce=ce, kd=kd, ccot=ccot, emb_ot=emb_ot, hid_ot=hid_ot, total=total,
        grads=grads, proj_grads=proj_grads, report=report,
    )


# =============================================================================
# Training loops
# =============================================================================

def _batches(n: int, batch: int, steps: int, seed: int) -> Iterator[Tuple[int, int, np.ndarray]]:
    """(step, epoch, indices); every epoch walks a fresh seeded permutation."""
    rng = np.random.default_rng(seed)
    per_epoch = math.ceil(n / batch)
    order = np.arange(n)
    for step in range(steps):
        epoch, pos = divmod(step, per_epoch)
        if pos == 0:
            order = rng.permutation(n)
        yield step, epoch, order[pos * batch:(pos + 1) * batch]


def _mean(values: List[Optional[float]]) -> Optional[float]:
    if any(v is None for v in values):
        return None
    return float(sum(values) / len(values))  # type: ignore[arg-type]


def pretrain_teacher(
    cfg: TrainConfig,
    dataset: Sequence[Sample],
    tokenizer: ToyTokenizer,
    cache: Optional[TeacherCache] = None,
) -> ToyLM:
    """
    Train the teacher with cross-entropy only, on raw and CoT responses.

    Results are looked up in / stored to ``cache`` when one is given.
    """
    settings = cfg.teacher_settings(tokenizer, dataset)
    if cache is not None:
        cached = cache.get(settings)
        if cached is not None:
            logger.info("Using cached teacher")
            return ToyLM.from_dict(cached)

    seed = cfg.seed + TEACHER_SEED_OFFSET
    teacher = init_toy_lm(tokenizer.size, cfg.teacher_embed_dim, cfg.teacher_hidden_dim, seed, cfg.init_scale)
    t_cfg = replace(cfg, alpha=0.0, use_cot_data=True, lr=cfg.teacher_lr)
    obj_cfg = t_cfg.objective_config()
    encoded = [encode_sample(tokenizer, s) for s in dataset]

    last = float("nan")
    for step, _, idx in _batches(len(encoded), cfg.batch, cfg.teacher_steps, seed + 1):
        results = [sample_objective(teacher, encoded[i], None, t_cfg, obj_cfg) for i in idx]
        grads = ToyLMGrads.zeros_like(teacher)
        for r in results:
            grads.add_(r.grads, 1.0 / len(results))  # type: ignore[arg-type]
        apply_gradients(teacher, grads, cfg.teacher_lr)
        last = float(np.mean([r.ce for r in results]))
        if step % 100 == 0:
            logger.debug("Teacher step %d: ce=%.6f", step, last)

    logger.info("Teacher pre-trained for %d steps (last batch ce=%.6f)", cfg.teacher_steps, last)
    if cache is not None:
        cache.set(settings, teacher.to_dict())
    return teacher


@dataclass
class DistillSetup:
    """Tokenizers, teacher and projections shared by runs over one dataset."""

    student_tokenizer: ToyTokenizer
    teacher_tokenizer: ToyTokenizer
    teacher: Optional[ToyLM]
    kd_enabled: bool


def prepare(
    cfg: TrainConfig,
    dataset: Sequence[Sample],
    teacher: Optional[ToyLM] = None,
    cache: Optional[TeacherCache] = None,
) -> DistillSetup:
    """Build tokenizers and, when alignment is on, the frozen teacher."""
    corpus = dataset_corpus(dataset)
    s_tok = make_tokenizer(cfg.student_tokenizer, corpus, cfg.num_merges)
    t_tok = make_tokenizer(cfg.teacher_tokenizer, corpus, cfg.num_merges)
    if teacher is None and cfg.alpha > 0:
        teacher = pretrain_teacher(cfg, dataset, t_tok, cache)
    return DistillSetup(
        student_tokenizer=s_tok,
        teacher_tokenizer=t_tok,
        teacher=teacher,
        kd_enabled=s_tok.to_dict() == t_tok.to_dict(),
    )


def init_projections(cfg: TrainConfig) -> ProjectionSet:
    """Projections for every layer whose widths differ."""
    proj = ProjectionSet()
    if cfg.teacher_embed_dim != cfg.student_embed_dim:
        proj.embedding = init_projection(cfg.teacher_embed_dim, cfg.student_embed_dim, cfg.seed + 1)
    if cfg.teacher_hidden_dim != cfg.student_hidden_dim:
        proj.hidden = init_projection(cfg.teacher_hidden_dim, cfg.student_hidden_dim, cfg.seed + 2)
    return proj


def train_run(
    cfg: TrainConfig,
    dataset: Optional[Sequence[Sample]] = None,
    teacher: Optional[ToyLM] = None,
    student: Optional[ToyLM] = None,
    monitor: Optional[TrainingMonitor] = None,
    cache: Optional[TeacherCache] = None,
) -> TrainingLog:
    """
    Distill a fresh student from a frozen teacher.

    Args:
        cfg: Run settings
        dataset: Samples (default: make_copy_dataset from cfg)
        teacher: Pre-trained teacher; trained with pretrain_teacher when None
        student: Starting student; initialized from cfg.seed when None
        monitor: Receives every step record
        cache: Teacher cache

    Returns:
        TrainingLog; ``aborted`` is set when the loss stopped being finite
    """
    if dataset is None:
        dataset = make_copy_dataset(cfg.dataset_size, cfg.seed, cfg.transform)
    setup = prepare(cfg, dataset, teacher, cache)

    if student is None:
        student = init_toy_lm(
            setup.student_tokenizer.size, cfg.student_embed_dim, cfg.student_hidden_dim, cfg.seed, cfg.init_scale
        )
    projections = init_projections(cfg) if cfg.alpha > 0 else ProjectionSet()
    obj_cfg = cfg.objective_config(projections)

    encoded = [encode_sample(setup.student_tokenizer, s) for s in dataset]
    views: List[Optional[TeacherView]] = [None] * len(dataset)
    if cfg.alpha > 0 and setup.teacher is not None:
        views = [teacher_view(setup.teacher, encode_sample(setup.teacher_tokenizer, s)) for s in dataset]

    per_epoch = math.ceil(len(encoded) / cfg.batch)
    monitor = monitor or TrainingMonitor(per_epoch)
    logger.info(
        "Training %d steps (alpha=%g, kd=%s, student V=%d, teacher V=%d)",
        cfg.steps, cfg.alpha, setup.kd_enabled, setup.student_tokenizer.size, setup.teacher_tokenizer.size,
    )

    aborted_at: Optional[int] = None
    for step, epoch, idx in _batches(len(encoded), cfg.batch, cfg.steps, cfg.seed + 3):
        try:
            results = [
                sample_objective(student, encoded[i], views[i], cfg, obj_cfg, setup.kd_enabled) for i in idx
            ]
            total = float(np.mean([r.total for r in results]))
        except DomainError as exc:
            logger.warning("Non-finite values at step %d: %s", step, exc)
            results, total = [], float("nan")

        if not results or not math.isfinite(total):
            monitor.record(StepRecord(step, epoch, float("nan"), None, None, None, None, float("nan")))
            logger.warning("Training diverged at step %d; aborting", step)
            aborted_at = step
            break

        monitor.record(
            StepRecord(
                step=step,
                epoch=epoch,
                ce=float(np.mean([r.ce for r in results])),
                kd=_mean([r.kd for r in results]),
                ccot=_mean([r.ccot for r in results]),
                emb_ot=_mean([r.emb_ot for r in results]),
                hid_ot=_mean([r.hid_ot for r in results]),
                total=total,
            )
        )

        grads = ToyLMGrads.zeros_like(student)
        for r in results:
            grads.add_(r.grads, 1.0 / len(results))  # type: ignore[arg-type]
        apply_gradients(student, grads, cfg.lr)

        if cfg.train_projections:
            for k, proj in enumerate((projections.embedding, projections.hidden)):
                if proj is None:
                    continue
                g = sum(r.proj_grads[k] for r in results if r.proj_grads[k] is not None)
                proj.weights -= cfg.proj_lr * g / len(results)

    log = monitor.build_log(aborted=aborted_at is not None, abort_step=aborted_at)
    log.summary["kd_enabled"] = setup.kd_enabled
    log.summary["config"] = cfg.to_dict()
    return log


# =============================================================================
# Ablations
# =============================================================================

ABLATIONS: Dict[str, Dict[str, Any]] = {
    "full": {},
    "only-cot": {"alpha": 0.0, "use_cot_data": True},
    "cst": {"use_crc": False},
    "crc": {"use_cst": False},
    "hidden-only": {"layers": "hidden"},
    "sft": {"alpha": 0.0, "use_cot_data": False},
}


def ablation_config(name: str, cfg: Optional[TrainConfig] = None) -> TrainConfig:
    """``cfg`` with the overrides of a named ablation preset."""
    if name not in ABLATIONS:
        raise ConfigurationError("ablation", f"unknown preset {name!r}; choose from {sorted(ABLATIONS)}")
    return replace(cfg or TrainConfig(), **ABLATIONS[name])


def run_ablation(
    name: str,
    cfg: Optional[TrainConfig] = None,
    dataset: Optional[Sequence[Sample]] = None,
    teacher: Optional[ToyLM] = None,
    cache: Optional[TeacherCache] = None,
) -> TrainingLog:
    """Run one named ablation preset."""
    run_cfg = ablation_config(name, cfg)
    logger.info("Running ablation %s", name)
    log = train_run(run_cfg, dataset, teacher=teacher, cache=cache)
    log.summary["ablation"] = name
    return log


def run_ablations(
    names: Sequence[str],
    cfg: Optional[TrainConfig] = None,
    dataset: Optional[Sequence[Sample]] = None,
    max_workers: int = 1,
    cache: Optional[TeacherCache] = None,
) -> Dict[str, TrainingLog]:
    """
    Run several presets against one shared, frozen teacher.

    Runs share no mutable state, so they may execute concurrently.
    """
    cfg = cfg or TrainConfig()
    if dataset is None:
        dataset = make_copy_dataset(cfg.dataset_size, cfg.seed, cfg.transform)
    t_tok = make_tokenizer(cfg.teacher_tokenizer, dataset_corpus(dataset), cfg.num_merges)
    teacher = pretrain_teacher(cfg, dataset, t_tok, cache)

    tasks = [lambda n=n: run_ablation(n, cfg, dataset, teacher=teacher) for n in names]
    return dict(zip(names, ParallelEvaluator(max_workers).run(tasks)))


__all__ = [
    "TrainConfig",
    "EncodedSample",
    "TeacherView",
    "SampleResult",
    "DistillSetup",
    "ABLATIONS",
    "encode_sample",
    "teacher_view",
    "sample_objective",
    "pretrain_teacher",
    "prepare",
    "init_projections",
    "train_run",
    "ablation_config",
    "run_ablation",
    "run_ablations",
]
