"""
Tests for the exact OT oracles.
"""

import numpy as np
import pytest

from otalign.core.oracles import MinCostFlow, exact_ot, lp_ot, permutation_oracle
from otalign.core.transport import EmpiricalMeasure, marginal_violation, uniform_measure
from otalign.exceptions import UnsupportedMeasureError, UnsupportedProblemError


class TestMinCostFlow:
    """Test the flow network directly"""

    def test_prefers_cheap_path(self):
        net = MinCostFlow(4)
        cheap = net.add_edge(0, 1, 1, 1.0)
        net.add_edge(1, 3, 2, 0.0)
        pricey = net.add_edge(0, 2, 2, 5.0)
        net.add_edge(2, 3, 2, 0.0)
        flow, cost = net.solve(0, 3, 2)
        assert flow == 2
        assert cost == pytest.approx(6.0)
        assert net.flow_on(cheap) == 1
        assert net.flow_on(pricey) == 1

    def test_partial_flow_when_capacity_runs_out(self):
        net = MinCostFlow(2)
        net.add_edge(0, 1, 1, 0.0)
        flow, _ = net.solve(0, 1, 3)
        assert flow == 1


class TestExactOT:
    """Test the min-cost-flow oracle"""

    def test_zero_cost(self):
        result = exact_ot(np.zeros((3, 2)), uniform_measure(3), uniform_measure(2))
        assert result.cost == 0.0
        assert result.converged

    def test_zero_cost_permutation(self):
        c = np.ones((3, 3)) - np.eye(3)
        result = exact_ot(c, uniform_measure(3), uniform_measure(3))
        assert result.cost == 0.0
        np.testing.assert_allclose(result.plan, np.eye(3) / 3)

    def test_two_by_three(self):
        result = exact_ot([[0, 1, 1], [1, 1, 0]], uniform_measure(2), uniform_measure(3))
        assert result.cost == pytest.approx(1 / 3, abs=1e-12)
        assert result.marginal_err <= 1e-12
        assert result.method == "min-cost-flow"

    def test_negative_costs(self):
        c = np.array([[-1.0, 0.0], [0.0, -1.0]])
        result = exact_ot(c, uniform_measure(2), uniform_measure(2))
        assert result.cost == pytest.approx(-1.0)

    def test_non_uniform_rational(self):
        alpha = EmpiricalMeasure.from_weights([0.25, 0.75])
        beta = EmpiricalMeasure.from_weights([0.5, 0.5])
        result = exact_ot([[0.0, 1.0], [1.0, 0.0]], alpha, beta)
        assert result.cost == pytest.approx(0.25)
        assert marginal_violation(result.plan, alpha.weights, beta.weights) <= 1e-12

    def test_common_denominator_too_large(self):
        alpha = EmpiricalMeasure.from_weights([1 / 999983, 1 - 1 / 999983])
        beta = EmpiricalMeasure.from_weights([1 / 999979, 1 - 1 / 999979])
        with pytest.raises(UnsupportedMeasureError):
            exact_ot(np.zeros((2, 2)), alpha, beta)

    def test_matches_lp(self, rng):
        for _ in range(10):
            c = rng.uniform(size=(4, 6))
            a, b = uniform_measure(4), uniform_measure(6)
            assert exact_ot(c, a, b).cost == pytest.approx(lp_ot(c, a, b).cost, abs=1e-9)


class TestPermutationOracle:
    """Test the brute-force oracle"""

    def test_identity_cost(self):
        assert permutation_oracle(np.ones((3, 3)) - np.eye(3)) == 0.0

    def test_swap(self):
        assert permutation_oracle([[0, 1], [1, 0]]) == 0.0

    def test_non_square_rejected(self):
        with pytest.raises(UnsupportedProblemError):
            permutation_oracle(np.zeros((2, 3)))

    def test_too_large_rejected(self):
        with pytest.raises(UnsupportedProblemError):
            permutation_oracle(np.zeros((9, 9)))

    def test_agrees_with_exact_ot(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            n = int(rng.integers(1, 7))
            c = rng.uniform(size=(n, n))
            exact = exact_ot(c, uniform_measure(n), uniform_measure(n)).cost
            assert exact == pytest.approx(permutation_oracle(c), abs=1e-9)


class TestLPOracle:
    """Test the HiGHS linear program"""

    def test_irrational_measure_supported(self):
        w = 1 / np.sqrt(2)
        alpha = EmpiricalMeasure.from_weights([w, 1 - w])
        result = lp_ot([[0.0, 1.0], [1.0, 0.0]], alpha, uniform_measure(2))
        assert result.method == "lp"
        assert result.cost == pytest.approx(w - 0.5, abs=1e-9)
