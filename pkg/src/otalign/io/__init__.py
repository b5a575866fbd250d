"""File formats and run configuration."""

from otalign.io.formats import (
    CostProblem,
    canonical_json,
    load_bundle_file,
    load_cost_file,
    load_json,
    load_quad_file,
    load_seq_file,
    plan_from_dict,
    seq_file_dict,
)
from otalign.io.run_config import RunConfig, load_run_config, make_projections, parse_run_config

__all__ = [
    "CostProblem",
    "canonical_json",
    "load_bundle_file",
    "load_cost_file",
    "load_json",
    "load_quad_file",
    "load_seq_file",
    "plan_from_dict",
    "seq_file_dict",
    "RunConfig",
    "load_run_config",
    "make_projections",
    "parse_run_config",
]
