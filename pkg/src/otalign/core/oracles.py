"""
Exact (unregularized) optimal transport solvers.

These are validation oracles for the Sinkhorn path and share none of its
code:

- ``exact_ot``: integer min-cost flow by successive shortest paths with
  node potentials, after scaling rational masses by a common denominator
- ``permutation_oracle``: brute force over permutations for small square
  uniform problems (the optimum sits on a vertex of the Birkhoff polytope)
- ``lp_ot``: the transport linear program handed to HiGHS, for measures
  that are not small-denominator rationals
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike
from scipy import optimize

from otalign.core.numerics import Matrix, as_matrix, frobenius_dot
from otalign.core.transport import EmpiricalMeasure, TransportPlan, marginal_violation
from otalign.exceptions import (
    DimensionError,
    UnsupportedMeasureError,
    UnsupportedProblemError,
)

logger = logging.getLogger(__name__)

MAX_DENOMINATOR = 10**6
PERMUTATION_LIMIT = 8
RATIONAL_TOL = 1e-12


# =============================================================================
# Min-cost flow
# =============================================================================

@dataclass
class _Edge:
    to: int
    rev: int
    cap: int
    cost: float


class MinCostFlow:
    """
    Successive-shortest-path min-cost flow on integer capacities.

    Edge costs must be non-negative; Dijkstra runs on reduced costs kept
    non-negative by Johnson potentials.
    """

    def __init__(self, num_nodes: int):
        self.graph: List[List[_Edge]] = [[] for _ in range(num_nodes)]

    def add_edge(self, src: int, dst: int, cap: int, cost: float) -> Tuple[int, int]:
        """Add a directed edge; returns (src, index) to read its flow back."""
        forward = _Edge(dst, len(self.graph[dst]), cap, cost)
        backward = _Edge(src, len(self.graph[src]), 0, -cost)
        self.graph[src].append(forward)
        self.graph[dst].append(backward)
        return src, len(self.graph[src]) - 1

    def flow_on(self, handle: Tuple[int, int]) -> int:
        """Flow currently routed through the edge identified by ``handle``."""
        src, idx = handle
        edge = self.graph[src][idx]
        return self.graph[edge.to][edge.rev].cap

    def solve(self, source: int, sink: int, demand: int) -> Tuple[int, float]:
        """
        Route up to ``demand`` units from source to sink at minimum cost.

        Returns:
            (flow routed, total cost)
        """
        n = len(self.graph)
        potential = [0.0] * n
        flow = 0
        total_cost = 0.0
        augmentations = 0

        while flow < demand:
            dist = [math.inf] * n
            prev: List[Tuple[int, int]] = [(-1, -1)] * n
            dist[source] = 0.0
            heap = [(0.0, source)]
            while heap:
                d, node = heapq.heappop(heap)
                if d > dist[node]:
                    continue
                for idx, edge in enumerate(self.graph[node]):
                    if edge.cap <= 0:
                        continue
                    # reduced cost; float noise can push it slightly below zero
                    reduced = max(edge.cost + potential[node] - potential[edge.to], 0.0)
                    nd = d + reduced
                    if nd < dist[edge.to]:
                        dist[edge.to] = nd
                        prev[edge.to] = (node, idx)
                        heapq.heappush(heap, (nd, edge.to))

            if math.isinf(dist[sink]):
                break
            for v in range(n):
                if not math.isinf(dist[v]):
                    potential[v] += dist[v]

            push = demand - flow
            v = sink
            while v != source:
                node, idx = prev[v]
                push = min(push, self.graph[node][idx].cap)
                v = node

            v = sink
            while v != source:
                node, idx = prev[v]
                edge = self.graph[node][idx]
                edge.cap -= push
                self.graph[v][edge.rev].cap += push
                total_cost += push * edge.cost
                v = node

            flow += push
            augmentations += 1

        logger.debug("Min-cost flow: %d units in %d augmentations", flow, augmentations)
        return flow, total_cost


# =============================================================================
# Oracles
# =============================================================================

def _integer_supplies(weights: Sequence[float], limit: int) -> Tuple[List[Fraction], int]:
    fracs = [Fraction(float(w)).limit_denominator(limit) for w in weights]
    for w, f in zip(weights, fracs):
        if abs(float(f) - float(w)) > RATIONAL_TOL:
            raise UnsupportedMeasureError(weights, limit)
    denom = 1
    for f in fracs:
        denom = math.lcm(denom, f.denominator)
        if denom > limit:
            raise UnsupportedMeasureError(weights, limit)
    return fracs, denom


def exact_ot(
    cost: ArrayLike,
    alpha: EmpiricalMeasure,
    beta: EmpiricalMeasure,
    max_denominator: int = MAX_DENOMINATOR,
) -> TransportPlan:
    """
    Exact optimal transport via integer min-cost flow.

    Masses are written as k/L for a common L <= ``max_denominator``,
    routed as integer supplies and demands, then rescaled by 1/L.

    Raises:
        UnsupportedMeasureError: If no such L exists
        DimensionError: If marginal lengths do not match the cost shape
    """
    c = as_matrix(cost, "cost")
    n, m = c.shape
    if len(alpha) != n:
        raise DimensionError("alpha", n, len(alpha))
    if len(beta) != m:
        raise DimensionError("beta", m, len(beta))

    fa, la = _integer_supplies(alpha.weights.tolist(), max_denominator)
    fb, lb = _integer_supplies(beta.weights.tolist(), max_denominator)
    scale = math.lcm(la, lb)
    if scale > max_denominator:
        raise UnsupportedMeasureError(alpha.weights.tolist() + beta.weights.tolist(), max_denominator)

    supply = [int(f * scale) for f in fa]
    demand = [int(f * scale) for f in fb]
    if sum(supply) != scale or sum(demand) != scale:
        raise UnsupportedMeasureError(alpha.weights.tolist() + beta.weights.tolist(), max_denominator)

    # costs shifted to be non-negative; total mass is fixed so the optimum is unchanged
    shifted = c - c.min()
    source, sink = n + m, n + m + 1
    network = MinCostFlow(n + m + 2)
    for i in range(n):
        network.add_edge(source, i, supply[i], 0.0)
    for j in range(m):
        network.add_edge(n + j, sink, demand[j], 0.0)
    handles = [
        [network.add_edge(i, n + j, min(supply[i], demand[j]), float(shifted[i, j])) for j in range(m)]
        for i in range(n)
    ]

    routed, _ = network.solve(source, sink, scale)
    if routed != scale:
        raise UnsupportedProblemError("exact_ot", f"routed {routed} of {scale} units")

    plan = np.array(
        [[network.flow_on(handles[i][j]) for j in range(m)] for i in range(n)],
        dtype=np.float64,
    ) / scale

    return TransportPlan(
        plan=plan,
        cost=frobenius_dot(plan, c),
        iterations=0,
        converged=True,
        marginal_err=marginal_violation(plan, alpha.weights, beta.weights),
        method="min-cost-flow",
        alpha=alpha.weights,
        beta=beta.weights,
    )


def permutation_oracle(cost: ArrayLike) -> float:
    """
    Uniform square OT cost by enumerating all permutations.

    Raises:
        UnsupportedProblemError: If the matrix is not square or N > 8
    """
    c = as_matrix(cost, "cost")
    n, m = c.shape
    if n != m:
        raise UnsupportedProblemError("permutation_oracle", f"matrix is {n}x{m}, not square")
    if n > PERMUTATION_LIMIT:
        raise UnsupportedProblemError("permutation_oracle", f"N={n} exceeds {PERMUTATION_LIMIT}")

    perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    totals = c[np.arange(n)[None, :], perms].sum(axis=1)
    return float(totals.min() / n)


def lp_ot(cost: ArrayLike, alpha: EmpiricalMeasure, beta: EmpiricalMeasure) -> TransportPlan:
    """Exact optimal transport as a linear program solved by HiGHS."""
    c = as_matrix(cost, "cost")
    n, m = c.shape
    if len(alpha) != n:
        raise DimensionError("alpha", n, len(alpha))
    if len(beta) != m:
        raise DimensionError("beta", m, len(beta))

    row_sums = np.kron(np.eye(n), np.ones((1, m)))
    col_sums = np.kron(np.ones((1, n)), np.eye(m))
    res = optimize.linprog(
        c.reshape(-1),
        A_eq=np.vstack([row_sums, col_sums]),
        b_eq=np.concatenate([alpha.weights, beta.weights]),
        bounds=(0, None),
        method="highs",
    )
    if not res.success:
        raise UnsupportedProblemError("lp_ot", res.message)

    plan = np.clip(res.x.reshape(n, m), 0.0, None)
    return TransportPlan(
        plan=plan,
        cost=frobenius_dot(plan, c),
        iterations=int(getattr(res, "nit", 0)),
        converged=True,
        marginal_err=marginal_violation(plan, alpha.weights, beta.weights),
        method="lp",
        alpha=alpha.weights,
        beta=beta.weights,
    )


__all__ = ["MinCostFlow", "exact_ot", "permutation_oracle", "lp_ot"]
