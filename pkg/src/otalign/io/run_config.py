"""
Run configuration files.

A RunConfig JSON object has three optional sections, each mirroring a
library config: ``sinkhorn`` (SinkhornConfig), ``objective``
(ObjectiveConfig) and ``train`` (TrainConfig). Unknown keys anywhere are
rejected. Omitted keys fall back to the library defaults, so a section
only states what it changes.

Precedence when building library configs: explicit overrides (CLI flags)
> file values > built-in defaults. OTALIGN_SEED, when set, replaces every
seed regardless of source.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from otalign.core.cost import init_projection
from otalign.core.objective import ObjectiveConfig, ProjectionSet
from otalign.core.transport import SinkhornConfig
from otalign.distill.trainer import TrainConfig
from otalign.exceptions import ConfigurationError
from otalign.io.formats import load_json

logger = logging.getLogger(__name__)


class SinkhornSection(BaseModel):
    """Sinkhorn solver settings"""
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    lam: Optional[float] = Field(None, alias="lambda", description="Regularization strength (> 0)")
    max_iters: Optional[int] = Field(None, description="Iteration cap")
    tol: Optional[float] = Field(None, description="Marginal tolerance")
    log_domain: Optional[bool] = Field(None, description="Run updates in the log domain")


class ObjectiveSection(BaseModel):
    """Cross-CoT objective settings"""
    model_config = ConfigDict(extra="forbid")

    alpha: Optional[float] = Field(None, description="Alignment weight in [0, 1]")
    temperature: Optional[float] = Field(None, description="KD temperature (> 0)")
    use_cst: Optional[bool] = None
    use_crc: Optional[bool] = None
    layers: Optional[Literal["both", "embedding", "hidden"]] = None
    max_workers: Optional[int] = None
    projection_seed: Optional[int] = Field(None, description="Seed for projections drawn when widths differ")


class TrainSection(BaseModel):
    """Toy distillation settings"""
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    steps: Optional[int] = None
    lr: Optional[float] = None
    alpha: Optional[float] = None
    lam: Optional[float] = Field(None, alias="lambda")
    seed: Optional[int] = None
    batch: Optional[int] = None
    dataset_size: Optional[int] = None
    transform: Optional[Literal["copy", "reverse"]] = None
    student_tokenizer: Optional[Literal["char", "pair"]] = None
    teacher_tokenizer: Optional[Literal["char", "pair"]] = None
    num_merges: Optional[int] = None
    student_embed_dim: Optional[int] = None
    student_hidden_dim: Optional[int] = None
    teacher_embed_dim: Optional[int] = None
    teacher_hidden_dim: Optional[int] = None
    init_scale: Optional[float] = None
    teacher_steps: Optional[int] = None
    teacher_lr: Optional[float] = None
    cot_ratio: Optional[float] = None
    use_cot_data: Optional[bool] = None
    use_cst: Optional[bool] = None
    use_crc: Optional[bool] = None
    layers: Optional[Literal["both", "embedding", "hidden"]] = None
    temperature: Optional[float] = None
    sinkhorn_tol: Optional[float] = None
    sinkhorn_max_iters: Optional[int] = None
    log_domain: Optional[bool] = None
    train_projections: Optional[bool] = None
    proj_lr: Optional[float] = None
    max_workers: Optional[int] = None


def _given(section: BaseModel) -> Dict[str, Any]:
    return section.model_dump(exclude_none=True, by_alias=False)


def _merge(base: Dict[str, Any], overrides: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    merged = dict(base)
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return merged


class RunConfig(BaseModel):
    """Complete run configuration file"""
    model_config = ConfigDict(extra="forbid")

    sinkhorn: SinkhornSection = Field(default_factory=SinkhornSection)
    objective: ObjectiveSection = Field(default_factory=ObjectiveSection)
    train: TrainSection = Field(default_factory=TrainSection)

    def sinkhorn_config(self, overrides: Optional[Dict[str, Any]] = None) -> SinkhornConfig:
        """SinkhornConfig from defaults, then file values, then ``overrides``."""
        return SinkhornConfig(**_merge(_given(self.sinkhorn), overrides))

    def objective_config(
        self,
        overrides: Optional[Dict[str, Any]] = None,
        sinkhorn_overrides: Optional[Dict[str, Any]] = None,
        seed: Optional[int] = None,
    ) -> ObjectiveConfig:
        """ObjectiveConfig; ``projection_seed`` is read separately via ``projection_seed()``."""
        values = _merge(_given(self.objective), overrides)
        values.pop("projection_seed", None)
        return ObjectiveConfig(sinkhorn=self.sinkhorn_config(sinkhorn_overrides), **values)

    def projection_seed(self, env_seed: Optional[int] = None, default: int = 0) -> int:
        if env_seed is not None:
            return env_seed
        if self.objective.projection_seed is not None:
            return self.objective.projection_seed
        return default

    def train_config(self, overrides: Optional[Dict[str, Any]] = None, env_seed: Optional[int] = None) -> TrainConfig:
        """
        TrainConfig from defaults, then the sinkhorn section's lambda and
        log_domain, then the train section, then ``overrides``.
        """
        base: Dict[str, Any] = {}
        if self.sinkhorn.lam is not None:
            base["lam"] = self.sinkhorn.lam
        if self.sinkhorn.log_domain is not None:
            base["log_domain"] = self.sinkhorn.log_domain
        values = _merge(_merge(base, _given(self.train)), overrides)
        cfg = TrainConfig(**values)
        if env_seed is not None:
            logger.info("OTALIGN_SEED=%d overrides train seed %d", env_seed, cfg.seed)
            cfg = replace(cfg, seed=env_seed)
        return cfg


def make_projections(
    emb_dims: tuple,
    hid_dims: tuple,
    seed: int,
) -> ProjectionSet:
    """
    Seeded projections for layers whose teacher/student widths differ.

    Args:
        emb_dims: (teacher D, student d) of the embedding layer
        hid_dims: (teacher D, student d) of the hidden layer
        seed: Base seed; the hidden projection uses seed + 1
    """
    proj = ProjectionSet()
    if emb_dims[0] != emb_dims[1]:
        proj.embedding = init_projection(emb_dims[0], emb_dims[1], seed)
    if hid_dims[0] != hid_dims[1]:
        proj.hidden = init_projection(hid_dims[0], hid_dims[1], seed + 1)
    return proj


def _describe(exc: ValidationError) -> str:
    first = exc.errors()[0]
    field = ".".join(str(part) for part in first["loc"]) or "<root>"
    return f"{field}: {first['msg']}"


def parse_run_config(data: Any) -> RunConfig:
    """
    Validate a decoded config object.

    Raises:
        ConfigurationError: Naming the first offending field
    """
    try:
        return RunConfig.model_validate(data if data is not None else {})
    except ValidationError as exc:
        raise ConfigurationError("config file", _describe(exc)) from exc


def load_run_config(path: Optional[Union[str, Path]]) -> RunConfig:
    """Load a RunConfig file; None yields all defaults."""
    if path is None:
        return RunConfig()
    return parse_run_config(load_json(path))


__all__ = [
    "RunConfig",
    "SinkhornSection",
    "ObjectiveSection",
    "TrainSection",
    "make_projections",
    "parse_run_config",
    "load_run_config",
]
