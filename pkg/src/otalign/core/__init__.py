"""Core otalign components: transport solvers, costs, alignment losses, objective."""

from otalign.core.alignment import (
    AlignReport,
    GradCheckReport,
    ReprBundle,
    compare_gradients,
    finite_diff_check,
    frozen_plan_loss,
    grad_wrt_cost,
    grad_wrt_projection,
    grad_wrt_student,
    grad_wrt_teacher,
    layer_ot_loss,
    ot_loss,
)
from otalign.core.cost import (
    Projection,
    attention_cost,
    cost_matrix,
    init_projection,
    similarity,
)
from otalign.core.numerics import (
    Matrix,
    Vector,
    as_matrix,
    central_difference,
    frobenius_dot,
    logsumexp,
    row_softmax,
)
from otalign.core.objective import (
    CCoTGrads,
    CCoTReport,
    CoTQuad,
    ObjectiveConfig,
    ProjectionSet,
    ccot_breakdown,
    ccot_frozen_loss,
    ccot_gradients,
    ccot_loss,
    ce_loss,
    ce_loss_grad,
    cross_rc_loss,
    cross_st_loss,
    kl_kd_loss,
    kl_kd_loss_grad,
    ot_kd_loss,
    total_objective,
)
from otalign.core.oracles import exact_ot, lp_ot, permutation_oracle
from otalign.core.parallel import ParallelEvaluator
from otalign.core.transport import (
    EmpiricalMeasure,
    SinkhornConfig,
    TransportPlan,
    entropy,
    marginal_violation,
    sinkhorn,
    sinkhorn_objective,
    uniform_measure,
)

__all__ = [
    # numerics
    "Matrix",
    "Vector",
    "as_matrix",
    "central_difference",
    "frobenius_dot",
    "logsumexp",
    "row_softmax",
    # transport
    "EmpiricalMeasure",
    "SinkhornConfig",
    "TransportPlan",
    "entropy",
    "marginal_violation",
    "sinkhorn",
    "sinkhorn_objective",
    "uniform_measure",
    "exact_ot",
    "lp_ot",
    "permutation_oracle",
    # cost
    "Projection",
    "attention_cost",
    "cost_matrix",
    "init_projection",
    "similarity",
    # alignment
    "AlignReport",
    "GradCheckReport",
    "ReprBundle",
    "compare_gradients",
    "finite_diff_check",
    "frozen_plan_loss",
    "grad_wrt_cost",
    "grad_wrt_projection",
    "grad_wrt_student",
    "grad_wrt_teacher",
    "layer_ot_loss",
    "ot_loss",
    # objective
    "CCoTGrads",
    "CCoTReport",
    "CoTQuad",
    "ObjectiveConfig",
    "ProjectionSet",
    "ccot_breakdown",
    "ccot_frozen_loss",
    "ccot_gradients",
    "ccot_loss",
    "ce_loss",
    "ce_loss_grad",
    "cross_rc_loss",
    "cross_st_loss",
    "kl_kd_loss",
    "kl_kd_loss_grad",
    "ot_kd_loss",
    "total_objective",
    # parallel
    "ParallelEvaluator",
]
