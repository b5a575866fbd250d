"""
otalign: Optimal-Transport Sequence Alignment for Cross-Tokenizer Distillation
==============================================================================

otalign aligns a student's token representations with a teacher's when the
two use different tokenizers, so no position-wise correspondence exists:
- Entropic optimal transport (log-domain Sinkhorn) with exact oracles
- Cross-attention cost between student and (projected) teacher sequences
- Layer-wise OT losses with analytic frozen-plan gradients
- Cross chain-of-thought (CoT) objectives over raw/CoT pairs
- A toy distillation harness for end-to-end runs

Example Usage:
    import numpy as np
    from otalign import ot_loss

    x = np.random.default_rng(0).normal(size=(4, 3))
    y = np.random.default_rng(1).normal(size=(5, 3))
    loss, plan = ot_loss(x, y)
    print(loss, plan.converged)
"""

__version__ = "0.1.0"
__license__ = "MIT"

from otalign.core import (
    AlignReport,
    CCoTReport,
    CoTQuad,
    EmpiricalMeasure,
    ObjectiveConfig,
    Projection,
    ProjectionSet,
    ReprBundle,
    SinkhornConfig,
    TransportPlan,
    ccot_breakdown,
    ccot_loss,
    ce_loss,
    cost_matrix,
    exact_ot,
    finite_diff_check,
    grad_wrt_student,
    kl_kd_loss,
    layer_ot_loss,
    ot_kd_loss,
    ot_loss,
    sinkhorn,
    total_objective,
    uniform_measure,
)
from otalign.exceptions import OTAlignError

__all__ = [
    "__version__",
    "AlignReport",
    "CCoTReport",
    "CoTQuad",
    "EmpiricalMeasure",
    "ObjectiveConfig",
    "OTAlignError",
    "Projection",
    "ProjectionSet",
    "ReprBundle",
    "SinkhornConfig",
    "TransportPlan",
    "ccot_breakdown",
    "ccot_loss",
    "ce_loss",
    "cost_matrix",
    "exact_ot",
    "finite_diff_check",
    "grad_wrt_student",
    "kl_kd_loss",
    "layer_ot_loss",
    "ot_kd_loss",
    "ot_loss",
    "sinkhorn",
    "total_objective",
    "uniform_measure",
]
