"""Core container types and shared quantities."""

import numpy as np
import pytest

from sblscreen.problem import (
    NonPositiveBaseline,
    Partition,
    Problem,
    SparseSolution,
    WeightVector,
    ZeroColumn,
    lambda_max,
    normalize_columns,
    screening_percentage,
    speedup_factor,
)


class TestNormalizeColumns:
    def test_three_four_five(self):
        mat, scales = normalize_columns(np.array([[3.0], [4.0]]))
        np.testing.assert_allclose(mat[:, 0], [0.6, 0.8])
        assert scales[0] == 5.0

    def test_identity_unchanged(self):
        eye = np.eye(4)
        mat, scales = normalize_columns(eye)
        np.testing.assert_array_equal(mat, eye)
        np.testing.assert_array_equal(scales, np.ones(4))

    def test_zero_column_rejected(self):
        with pytest.raises(ZeroColumn) as err:
            normalize_columns(np.array([[1.0, 0.0], [0.0, 0.0]]))
        assert err.value.index == 1

    def test_reconstruction(self):
        rng = np.random.default_rng(0)
        raw = rng.normal(size=(7, 5)) * rng.uniform(0.1, 10, size=5)
        mat, scales = normalize_columns(raw)
        np.testing.assert_allclose(mat * scales, raw, rtol=1e-15)

    def test_idempotent_and_unit_norms(self):
        rng = np.random.default_rng(1)
        mat, _ = normalize_columns(rng.normal(size=(30, 20)))
        again, scales = normalize_columns(mat)
        np.testing.assert_allclose(again, mat, rtol=0, atol=1e-15)
        np.testing.assert_allclose(scales, 1.0, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(mat, axis=0), 1.0, atol=1e-12)


class TestProblem:
    def test_basic_construction(self):
        prob = Problem(np.eye(3), np.arange(3.0), 0.5)
        assert prob.n_samples == 3 and prob.n_features == 3
        assert prob.has_unit_columns()

    def test_arrays_are_frozen(self):
        prob = Problem(np.eye(2), np.ones(2), 1.0)
        with pytest.raises(ValueError):
            prob.dictionary[0, 0] = 2.0

    @pytest.mark.parametrize("lam", [0.0, -1.0, np.nan, np.inf])
    def test_noise_level_must_be_positive(self, lam):
        with pytest.raises(ValueError):
            Problem(np.eye(2), np.ones(2), lam)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            Problem(np.eye(3), np.ones(2), 1.0)

    def test_zero_column(self):
        with pytest.raises(ZeroColumn):
            Problem(np.array([[1.0, 0.0], [0.0, 0.0]]), np.ones(2), 1.0)

    def test_zero_feature_problem_allowed(self):
        prob = Problem(np.zeros((3, 0)), np.ones(3), 1.0)
        assert prob.n_features == 0

    def test_with_noise_level(self):
        prob = Problem(np.eye(2), np.ones(2), 1.0)
        other = prob.with_noise_level(2.0)
        assert other.noise_level == 2.0
        np.testing.assert_array_equal(other.dictionary, prob.dictionary)


class TestLambdaMax:
    def test_identity(self):
        prob = Problem(np.eye(2), np.array([3.0, -4.0]), 1.0)
        assert lambda_max(prob) == 4.0

    def test_orthogonal_response(self):
        mat = np.array([[1.0], [0.0]])
        prob = Problem(mat, np.array([0.0, 2.0]), 1.0)
        assert lambda_max(prob) == 0.0

    def test_matches_exhaustive_scan(self):
        rng = np.random.default_rng(3)
        mat, _ = normalize_columns(rng.normal(size=(10, 50)))
        y = rng.normal(size=10)
        prob = Problem(mat, y, 1.0)
        brute = max(abs(float(mat[:, i] @ y)) for i in range(50))
        assert lambda_max(prob) == pytest.approx(brute, rel=0, abs=0)

    def test_dominates_every_correlation(self):
        rng = np.random.default_rng(4)
        mat, _ = normalize_columns(rng.normal(size=(8, 30)))
        y = rng.normal(size=8)
        prob = Problem(mat, y, 1.0)
        lm = lambda_max(prob)
        corr = np.abs(mat.T @ y)
        assert np.all(lm >= corr)
        assert lm == corr[int(np.argmax(corr))]
        # per-column recomputation agrees up to dot-product rounding
        assert lm == pytest.approx(
            abs(float(mat[:, int(np.argmax(corr))] @ y)), rel=1e-14
        )


class TestPartitionAndMetrics:
    def test_screening_percentage(self):
        part = Partition(selected=np.arange(250), rejected=np.arange(250, 1000))
        assert screening_percentage(part) == 0.75

    def test_empty_rejection(self):
        part = Partition(selected=np.arange(10), rejected=np.array([], dtype=int))
        assert screening_percentage(part) == 0.0

    def test_range(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            n = int(rng.integers(1, 50))
            k = int(rng.integers(0, n + 1))
            idx = rng.permutation(n)
            part = Partition(selected=idx[k:], rejected=idx[:k])
            assert 0.0 <= screening_percentage(part) <= 1.0

    def test_partition_must_cover(self):
        with pytest.raises(ValueError):
            Partition(selected=np.array([0, 1]), rejected=np.array([1, 2]))

    def test_speedup_examples(self):
        assert speedup_factor(0.1, 0.4, 1.0) == pytest.approx(0.5)
        assert speedup_factor(0.0, 2.5, 2.5) == pytest.approx(1.0)

    def test_speedup_needs_positive_baseline(self):
        with pytest.raises(NonPositiveBaseline):
            speedup_factor(0.1, 0.1, 0.0)
        with pytest.raises(ValueError):
            speedup_factor(-0.1, 0.1, 1.0)


class TestWeightVector:
    def test_u_min_cached(self):
        w = WeightVector(np.array([2.0, 0.5, 1.5]))
        assert w.u_min == 0.5

    def test_positive_required(self):
        with pytest.raises(ValueError):
            WeightVector(np.array([1.0, 0.0]))
        with pytest.raises(ValueError):
            WeightVector(np.array([1.0, -2.0]))

    def test_ones(self):
        w = WeightVector.ones(4)
        np.testing.assert_array_equal(w.u, np.ones(4))
        assert w.u_min == 1.0


class TestSparseSolution:
    def test_support_rule(self):
        theta = np.array([0.0, 2.0, 1e-9, -3.0])
        sol = SparseSolution.from_theta(theta, 0.0)
        np.testing.assert_array_equal(sol.support, [1, 3])
        # tolerance is scale-aware: 1e-6 * max(1, 3.0)
        assert sol.support_tol == pytest.approx(3e-6)

    def test_small_scale_uses_absolute_floor(self):
        sol = SparseSolution.from_theta(np.array([1e-7, 0.5]), 0.0)
        np.testing.assert_array_equal(sol.support, [1])

    def test_gap_clamped_nonnegative(self):
        sol = SparseSolution.from_theta(np.zeros(2), -1e-15)
        assert sol.duality_gap == 0.0

    def test_inconsistent_support_rejected(self):
        with pytest.raises(ValueError):
            SparseSolution(np.array([1.0, 0.0]), np.array([1]), 0.0)
