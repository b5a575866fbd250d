"""
Tests for empirical measures and the Sinkhorn solver.
"""

import math

import numpy as np
import pytest

from otalign.core.oracles import exact_ot
from otalign.core.transport import (
    EmpiricalMeasure,
    SinkhornConfig,
    entropy,
    marginal_violation,
    sinkhorn,
    sinkhorn_objective,
    uniform_measure,
)
from otalign.exceptions import ConfigurationError, DimensionError, DomainError

TWO_BY_THREE = [[0.0, 1.0, 1.0], [1.0, 1.0, 0.0]]


class TestEmpiricalMeasure:
    """Test measure construction and validation"""

    def test_uniform(self):
        np.testing.assert_array_equal(uniform_measure(1).weights, [1.0])
        np.testing.assert_array_equal(uniform_measure(4).weights, [0.25] * 4)
        w = uniform_measure(3).weights
        np.testing.assert_allclose(w, 1 / 3)
        assert abs(w.sum() - 1.0) <= 1e-15

    def test_zero_atoms_rejected(self):
        with pytest.raises(DimensionError):
            uniform_measure(0)

    def test_negative_weight_rejected(self):
        with pytest.raises(DomainError):
            EmpiricalMeasure.from_weights([1.5, -0.5])

    def test_off_simplex_rejected(self):
        with pytest.raises(DomainError):
            EmpiricalMeasure.from_weights([0.5, 0.6])

    def test_weights_are_read_only(self):
        m = EmpiricalMeasure.from_weights([0.25, 0.75])
        with pytest.raises(ValueError):
            m.weights[0] = 1.0
        assert len(m) == 2


class TestSinkhornConfig:
    """Test solver settings"""

    def test_defaults(self):
        cfg = SinkhornConfig()
        assert cfg.lam == 50.0
        assert cfg.max_iters == 10_000
        assert cfg.tol == 1e-9
        assert cfg.log_domain is True

    def test_to_dict_uses_lambda_key(self):
        assert SinkhornConfig(lam=3.0).to_dict()["lambda"] == 3.0

    @pytest.mark.parametrize(
        "kwargs",
        [{"lam": 0.0}, {"lam": -1.0}, {"tol": 0.0}, {"max_iters": 0}],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            SinkhornConfig(**kwargs)


class TestEntropy:
    """Test plan entropy"""

    def test_point_mass(self):
        assert entropy([[1.0]]) == 0.0

    def test_product_coupling(self):
        assert entropy(np.full((2, 2), 0.25)) == pytest.approx(math.log(4), abs=1e-12)

    def test_diagonal(self):
        assert entropy([[0.5, 0.0], [0.0, 0.5]]) == pytest.approx(math.log(2), abs=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            entropy([[1.1, -0.1]])


class TestSinkhorn:
    """Test the entropic solver"""

    def test_single_point(self):
        result = sinkhorn([[0.7]], uniform_measure(1), uniform_measure(1), SinkhornConfig(lam=3.0))
        np.testing.assert_array_equal(result.plan, [[1.0]])
        assert result.cost == pytest.approx(0.7)
        assert result.converged
        assert result.method == "analytic"

    def test_single_row_is_analytic(self):
        beta = EmpiricalMeasure.from_weights([0.2, 0.3, 0.5])
        result = sinkhorn([[0.1, 0.9, 0.4]], uniform_measure(1), beta)
        np.testing.assert_allclose(result.plan, [[0.2, 0.3, 0.5]])
        assert result.iterations == 0

    def test_constant_cost_gives_product_coupling(self):
        result = sinkhorn(np.full((2, 2), 0.5), uniform_measure(2), uniform_measure(2), SinkhornConfig(lam=10.0))
        np.testing.assert_allclose(result.plan, 0.25, atol=1e-12)
        assert result.cost == pytest.approx(0.5)

    def test_two_by_three_close_to_exact(self):
        result = sinkhorn(TWO_BY_THREE, uniform_measure(2), uniform_measure(3), SinkhornConfig(lam=200.0))
        assert result.converged
        assert result.cost == pytest.approx(1 / 3, abs=0.01)

    def test_scaling_domain_agrees_with_log_domain(self, rng):
        c = rng.uniform(size=(4, 5))
        a, b = uniform_measure(4), uniform_measure(5)
        log_plan = sinkhorn(c, a, b, SinkhornConfig(lam=5.0))
        plain = sinkhorn(c, a, b, SinkhornConfig(lam=5.0, log_domain=False))
        assert plain.method == "sinkhorn"
        np.testing.assert_allclose(plain.plan, log_plan.plan, atol=1e-8)

    def test_large_lambda_scaling_domain_flags_underflow(self):
        c = [[1.0, 2.0], [2.0, 1.0]]
        result = sinkhorn(c, uniform_measure(2), uniform_measure(2), SinkhornConfig(lam=1000.0, log_domain=False))
        assert not result.converged

    def test_large_lambda_log_domain_converges(self):
        c = [[1.0, 2.0], [2.0, 1.0]]
        result = sinkhorn(c, uniform_measure(2), uniform_measure(2), SinkhornConfig(lam=1000.0))
        assert result.converged
        np.testing.assert_allclose(result.plan, [[0.5, 0.0], [0.0, 0.5]], atol=1e-9)

    def test_non_convergence_is_flagged(self, rng):
        c = rng.uniform(size=(6, 6))
        result = sinkhorn(c, uniform_measure(6), uniform_measure(6), SinkhornConfig(lam=500.0, max_iters=1))
        assert not result.converged
        assert result.iterations == 1
        assert result.marginal_err > 1e-9

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            sinkhorn(np.zeros((2, 3)), uniform_measure(3), uniform_measure(3))

    def test_feasibility_on_random_instances(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            n, m = rng.integers(1, 13, size=2)
            c = rng.uniform(size=(n, m))
            a, b = uniform_measure(int(n)), uniform_measure(int(m))
            result = sinkhorn(c, a, b)
            if result.converged:
                assert marginal_violation(result.plan, a.weights, b.weights) <= 1e-9
                assert np.all(result.plan >= 0)

    def test_plan_entries_positive(self, rng):
        result = sinkhorn(rng.uniform(size=(4, 3)), uniform_measure(4), uniform_measure(3), SinkhornConfig(lam=5.0))
        assert np.all(result.plan > 0)

    def test_cost_bounded_below_by_exact(self, rng):
        for _ in range(10):
            c = rng.uniform(size=(5, 4))
            a, b = uniform_measure(5), uniform_measure(4)
            assert sinkhorn(c, a, b).cost >= exact_ot(c, a, b).cost - 1e-9

    def test_gap_shrinks_with_lambda(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            n, m = (int(k) for k in rng.integers(2, 9, size=2))
            c = rng.uniform(size=(n, m))
            a, b = uniform_measure(n), uniform_measure(m)
            exact = exact_ot(c, a, b).cost
            gaps = [sinkhorn(c, a, b, SinkhornConfig(lam=lam)).cost - exact for lam in (1.0, 10.0, 100.0)]
            assert all(g >= -1e-9 for g in gaps)
            assert gaps[0] >= gaps[1] - 1e-9
            assert gaps[1] >= gaps[2] - 1e-9

    def test_objective(self):
        result = sinkhorn(np.full((2, 2), 0.5), uniform_measure(2), uniform_measure(2), SinkhornConfig(lam=10.0))
        value = sinkhorn_objective(result, np.full((2, 2), 0.5), 10.0)
        assert value == pytest.approx(0.5 - math.log(4) / 10.0, abs=1e-12)

    def test_to_dict(self):
        result = sinkhorn([[0.3]], uniform_measure(1), uniform_measure(1))
        data = result.to_dict()
        assert data["plan"] == [[1.0]]
        assert data["converged"] is True
        assert set(data) >= {"cost", "converged", "iterations", "plan"}
