"""
Entropy-regularized optimal transport between empirical measures.

The solver works on the kernel form of the regularized problem: the
optimal coupling is ``diag(u) exp(-lam * C) diag(v)`` for scaling vectors
``u`` and ``v`` found by alternately matching the column and row
marginals. With ``log_domain`` the scalings are kept as log-potentials and
every update goes through a log-sum-exp, which removes kernel underflow
for large ``lam``.

Example:
    >>> from otalign.core.transport import SinkhornConfig, sinkhorn, uniform_measure
    >>> result = sinkhorn([[0.0, 1.0], [1.0, 0.0]], uniform_measure(2), uniform_measure(2))
    >>> result.converged, round(result.cost, 6)
    (True, 0.0)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
from numpy.typing import ArrayLike
from scipy import special

from otalign.core.numerics import Matrix, Vector, as_matrix, frobenius_dot, lse_cols, lse_rows
from otalign.exceptions import ConfigurationError, DimensionError, DomainError

logger = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-12


# =============================================================================
# Data Classes
# =============================================================================

@dataclass(frozen=True)
class EmpiricalMeasure:
    """Non-negative weights on the probability simplex."""

    weights: Vector

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise DimensionError("EmpiricalMeasure.weights", "non-empty 1-D vector", w.shape)
        if not np.all(np.isfinite(w)):
            raise DomainError("EmpiricalMeasure.weights", "non-finite", "weights must be finite")
        if np.any(w < 0):
            raise DomainError("EmpiricalMeasure.weights", float(w.min()), "weights must be >= 0")
        total = float(w.sum())
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise DomainError("EmpiricalMeasure.weights", total, "weights must sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return int(self.weights.size)

    @classmethod
    def from_weights(cls, weights: ArrayLike) -> "EmpiricalMeasure":
        """Build a measure from any array-like of weights."""
        return cls(np.asarray(weights, dtype=np.float64))


@dataclass(frozen=True)
class SinkhornConfig:
    """
    Settings for the Sinkhorn solver.

    Attributes:
        lam: Regularization strength; the kernel is exp(-lam * C), so larger
            values mean weaker entropic smoothing
        max_iters: Iteration cap
        tol: Stop once the L-infinity marginal violation is <= tol
        log_domain: Run the scaling updates on log-potentials
    """

    lam: float = 50.0
    max_iters: int = 10_000
    tol: float = 1e-9
    log_domain: bool = True

    def __post_init__(self) -> None:
        if not self.lam > 0 or not np.isfinite(self.lam):
            raise ConfigurationError("lambda", f"must be a finite value > 0, got {self.lam}")
        if not self.tol > 0:
            raise ConfigurationError("tol", f"must be > 0, got {self.tol}")
        if int(self.max_iters) < 1:
            raise ConfigurationError("max_iters", f"must be >= 1, got {self.max_iters}")

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "lambda": self.lam,
            "max_iters": self.max_iters,
            "tol": self.tol,
            "log_domain": self.log_domain,
        }


@dataclass
class TransportPlan:
    """
    A feasible coupling with its cost and solver diagnostics.

    Attributes:
        plan: N x M coupling matrix (mass moved from row i to column j)
        cost: Frobenius product of the plan with the cost matrix
        iterations: Solver iterations performed (0 for closed-form cases)
        converged: Whether the stopping criterion was met
        marginal_err: L-infinity violation of both marginals
        method: Which solver produced the plan
        alpha: Row marginal the plan was solved for
        beta: Column marginal the plan was solved for
    """

    plan: Matrix
    cost: float
    iterations: int
    converged: bool
    marginal_err: float
    method: str = "sinkhorn-log"
    alpha: Optional[Vector] = field(default=None, repr=False)
    beta: Optional[Vector] = field(default=None, repr=False)

    @property
    def shape(self) -> tuple:
        return self.plan.shape

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "cost": self.cost,
            "converged": self.converged,
            "iterations": self.iterations,
            "marginal_err": self.marginal_err,
            "method": self.method,
            "plan": self.plan.tolist(),
        }


# =============================================================================
# Measures and diagnostics
# =============================================================================

def uniform_measure(n: int) -> EmpiricalMeasure:
    """Uniform weights 1/n on n atoms."""
    if n < 1:
        raise DimensionError("uniform_measure", ">= 1 atoms", n)
    return EmpiricalMeasure(np.full(n, 1.0 / n))


def marginal_violation(plan: ArrayLike, alpha: ArrayLike, beta: ArrayLike) -> float:
    """Largest absolute deviation of the row and column sums from alpha and beta."""
    t = np.asarray(plan, dtype=np.float64)
    a = np.asarray(alpha, dtype=np.float64)
    b = np.asarray(beta, dtype=np.float64)
    if t.shape != (a.size, b.size):
        raise DimensionError("marginal_violation", (a.size, b.size), t.shape)
    row_err = np.abs(t.sum(axis=1) - a).max()
    col_err = np.abs(t.sum(axis=0) - b).max()
    return float(max(row_err, col_err))


def entropy(plan: ArrayLike) -> float:
    """
    Entropy -sum T_ij log T_ij, with 0 log 0 taken as 0.

    Raises:
        DomainError: If any entry is negative
    """
    t = np.asarray(plan, dtype=np.float64)
    if np.any(t < 0):
        raise DomainError("plan entry", float(t.min()), "entropy needs non-negative entries")
    return float(special.entr(t).sum())


def sinkhorn_objective(result: TransportPlan, cost: ArrayLike, lam: float) -> float:
    """Regularized objective <T, C> - H(T) / lam for a solved plan."""
    if lam <= 0:
        raise DomainError("lambda", lam, "must be > 0")
    return frobenius_dot(result.plan, cost) - entropy(result.plan) / lam


def _check_marginals(cost: Matrix, alpha: EmpiricalMeasure, beta: EmpiricalMeasure) -> None:
    n, m = cost.shape
    if len(alpha) != n:
        raise DimensionError("alpha", n, len(alpha))
    if len(beta) != m:
        raise DimensionError("beta", m, len(beta))


# =============================================================================
# Sinkhorn
# =============================================================================

def sinkhorn(
    cost: ArrayLike,
    alpha: EmpiricalMeasure,
    beta: EmpiricalMeasure,
    cfg: Optional[SinkhornConfig] = None,
) -> TransportPlan:
    """
    Solve the entropy-regularized transport problem.

    Non-convergence is reported through ``converged=False`` rather than an
    exception; the best plan found so far is returned.

    Args:
        cost: N x M cost matrix
        alpha: Row marginal (N atoms)
        beta: Column marginal (M atoms)
        cfg: Solver settings (defaults: lam=50, tol=1e-9, log domain)

    Returns:
        TransportPlan with cost = <plan, cost>
    """
    cfg = cfg or SinkhornConfig()
    c = as_matrix(cost, "cost")
    _check_marginals(c, alpha, beta)
    a, b = alpha.weights, beta.weights

    n, m = c.shape
    if n == 1 or m == 1:
        # the marginals pin down the only feasible coupling
        plan = np.outer(a, b)
        return TransportPlan(
            plan=plan,
            cost=frobenius_dot(plan, c),
            iterations=0,
            converged=True,
            marginal_err=marginal_violation(plan, a, b),
            method="analytic",
            alpha=a,
            beta=b,
        )

    if cfg.log_domain:
        plan, iterations, err = _sinkhorn_log(c, a, b, cfg)
        method = "sinkhorn-log"
    else:
        plan, iterations, err = _sinkhorn_scaling(c, a, b, cfg)
        method = "sinkhorn"

    converged = bool(np.isfinite(err) and err <= cfg.tol)
    if not converged:
        logger.warning(
            "Sinkhorn did not converge: %d iterations, marginal_err=%.3e, lambda=%g",
            iterations, err, cfg.lam,
        )

    return TransportPlan(
        plan=plan,
        cost=frobenius_dot(plan, c) if np.all(np.isfinite(plan)) else float("nan"),
        iterations=iterations,
        converged=converged,
        marginal_err=float(err),
        method=method,
        alpha=a,
        beta=b,
    )


def _sinkhorn_log(c: Matrix, a: Vector, b: Vector, cfg: SinkhornConfig):
    """Log-potential updates; returns (plan, iterations, marginal_err)."""
    scaled = -cfg.lam * c
    with np.errstate(divide="ignore"):
        log_a = np.log(a)
        log_b = np.log(b)

    u = np.zeros_like(a)
    v = np.zeros_like(b)
    plan = np.outer(a, b)
    err = np.inf

    for it in range(1, cfg.max_iters + 1):
        v = log_b - lse_cols(scaled + u[:, None])
        u = log_a - lse_rows(scaled + v[None, :])

        plan = np.exp(scaled + u[:, None] + v[None, :])
        err = max(
            np.abs(plan.sum(axis=1) - a).max(),
            np.abs(plan.sum(axis=0) - b).max(),
        )
        if it % 1000 == 0:
            logger.debug("Sinkhorn (log) iteration %d: marginal_err=%.3e", it, err)
        if err <= cfg.tol:
            return plan, it, float(err)

    return plan, cfg.max_iters, float(err)


def _sinkhorn_scaling(c: Matrix, a: Vector, b: Vector, cfg: SinkhornConfig):
    """Classic multiplicative updates; returns (plan, iterations, marginal_err)."""
    kernel = np.exp(-cfg.lam * c)
    u = np.ones_like(a)
    v = np.ones_like(b)
    plan = np.outer(a, b)
    err = np.inf

    for it in range(1, cfg.max_iters + 1):
        with np.errstate(divide="ignore", invalid="ignore"):
            v = b / (kernel.T @ u)
            u = a / (kernel @ v)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            logger.warning(
                "Sinkhorn kernel underflow at iteration %d (lambda=%g); use log_domain",
                it, cfg.lam,
            )
            return plan, it, float("inf")

        plan = u[:, None] * kernel * v[None, :]
        err = max(
            np.abs(plan.sum(axis=1) - a).max(),
            np.abs(plan.sum(axis=0) - b).max(),
        )
        if it % 1000 == 0:
            logger.debug("Sinkhorn iteration %d: marginal_err=%.3e", it, err)
        if err <= cfg.tol:
            return plan, it, float(err)

    return plan, cfg.max_iters, float(err)


__all__ = [
    "EmpiricalMeasure",
    "SinkhornConfig",
    "TransportPlan",
    "uniform_measure",
    "marginal_violation",
    "entropy",
    "sinkhorn_objective",
    "sinkhorn",
]
