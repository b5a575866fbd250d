"""
Tests for the dense-matrix helpers.
"""

import math

import numpy as np
import pytest

from otalign.core.numerics import (
    as_matrix,
    central_difference,
    frobenius_dot,
    logsumexp,
    row_softmax,
)
from otalign.exceptions import DimensionError, DomainError


class TestAsMatrix:
    """Test matrix validation"""

    def test_converts_nested_lists(self):
        m = as_matrix([[1, 2], [3, 4]])
        assert m.dtype == np.float64
        assert m.shape == (2, 2)
        assert m.flags["C_CONTIGUOUS"]

    def test_ragged_rows_rejected(self):
        with pytest.raises(DimensionError):
            as_matrix([[1, 2], [3]])

    def test_empty_rejected(self):
        with pytest.raises(DimensionError):
            as_matrix(np.zeros((0, 3)))

    def test_vector_rejected(self):
        with pytest.raises(DimensionError):
            as_matrix([1.0, 2.0])

    def test_non_finite_rejected(self):
        with pytest.raises(DomainError):
            as_matrix([[1.0, float("nan")]])


class TestRowSoftmax:
    """Test row-wise softmax"""

    def test_equal_logits(self):
        np.testing.assert_allclose(row_softmax([[0.0, 0.0]]), [[0.5, 0.5]])

    def test_worked_example(self):
        out = row_softmax([[0.70710678, 0.0], [0.0, 0.70710678]])
        np.testing.assert_allclose(out, [[0.6698, 0.3302], [0.3302, 0.6698]], atol=1e-4)

    def test_large_logits_do_not_overflow(self):
        out = row_softmax([[1000.0, 1000.0]])
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out, [[0.5, 0.5]])

    def test_rows_sum_to_one(self, rng):
        for n in (1, 7, 64):
            out = row_softmax(rng.normal(scale=5.0, size=(n, n)))
            np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)
            assert np.all(out > 0) and np.all(out <= 1)

    def test_shift_invariance(self, rng):
        m = rng.normal(size=(5, 4))
        shift = rng.normal(size=(5, 1)) * 10
        np.testing.assert_allclose(row_softmax(m + shift), row_softmax(m), atol=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(DimensionError):
            row_softmax(np.zeros((0, 0)))


class TestLogSumExp:
    """Test stable log-sum-exp"""

    def test_single_element_is_exact(self):
        assert logsumexp([0.0]) == 0.0
        assert logsumexp([-3.25]) == -3.25

    def test_equal_terms(self):
        assert logsumexp([math.log(2), math.log(2)]) == pytest.approx(math.log(4), abs=1e-12)

    def test_very_negative(self):
        assert logsumexp([-1000.0, -1000.0]) == pytest.approx(-1000.0 + math.log(2), abs=1e-9)

    def test_shift(self, rng):
        v = rng.normal(size=10)
        assert logsumexp(v + 7.5) == pytest.approx(logsumexp(v) + 7.5, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(DimensionError):
            logsumexp([])


class TestFrobeniusDot:
    """Test the Frobenius inner product"""

    def test_identity(self):
        assert frobenius_dot(np.eye(2), np.eye(2)) == 2.0

    def test_zeros(self, rng):
        assert frobenius_dot(np.zeros((3, 2)), rng.normal(size=(3, 2))) == 0.0

    def test_sum_of_entries(self):
        assert frobenius_dot([[1, 2], [3, 4]], np.ones((2, 2))) == 10.0

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            frobenius_dot(np.ones((2, 2)), np.ones((2, 3)))


class TestCentralDifference:
    """Test the finite-difference helper"""

    def test_quadratic(self):
        x = np.array([[1.0, -2.0], [0.5, 3.0]])
        grad = central_difference(lambda z: float(np.sum(z * z)), x)
        np.testing.assert_allclose(grad, 2 * x, rtol=1e-8)

    def test_restores_input(self):
        x = np.array([0.1, 0.2, 0.3])
        before = x.copy()
        central_difference(lambda z: float(np.sum(np.sin(z))), x)
        np.testing.assert_array_equal(x, before)

    def test_step_must_be_positive(self):
        with pytest.raises(DomainError):
            central_difference(lambda z: 0.0, np.zeros(2), h=0.0)
