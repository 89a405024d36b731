"""
Tests for the Dirichlet helpers.
"""

import numpy as np
import pytest
from scipy import special

from evidential import dirichlet
from evidential.dirichlet import DirichletParams, SimplexPoint
from utils.errors import DirichletError


class TestParams:
    def test_rejects_single_category(self):
        with pytest.raises(DirichletError):
            DirichletParams(np.array([2.0]))

    @pytest.mark.parametrize('alpha', [[1.0, 0.0], [1.0, -2.0], [1.0, np.inf]])
    def test_rejects_bad_concentrations(self, alpha):
        with pytest.raises(DirichletError):
            DirichletParams(np.array(alpha))

    def test_simplex_point_must_sum_to_one(self):
        with pytest.raises(DirichletError):
            SimplexPoint(np.array([0.5, 0.6]))


class TestMoments:
    @pytest.mark.parametrize('alpha', [[1, 1, 1], [8, 8, 8]])
    def test_symmetric_mean(self, alpha):
        np.testing.assert_allclose(dirichlet.mean(alpha).p, [1 / 3] * 3)

    def test_mean(self):
        np.testing.assert_allclose(dirichlet.mean([4, 7, 17]).p, [0.142857, 0.25, 0.607143], atol=1e-6)

    def test_mean_matches_sampling(self):
        draws = dirichlet.sample([4, 7, 17], seed=0, size=200_000)
        np.testing.assert_allclose(draws.mean(axis=0), dirichlet.mean([4, 7, 17]).p, atol=3e-3)

    @pytest.mark.parametrize('alpha, expected', [([1, 1, 1], 2 / 36), ([8, 8, 8], 128 / 14400)])
    def test_variance(self, alpha, expected):
        for k in range(3):
            assert dirichlet.variance(alpha, k) == pytest.approx(expected)

    def test_second_moment_matches_sampling(self):
        alpha = [4, 7, 17]
        draws = dirichlet.sample(alpha, seed=2, size=400_000)
        expected = [dirichlet.mean(alpha).p[k] ** 2 + dirichlet.variance(alpha, k) for k in range(3)]
        np.testing.assert_allclose((draws ** 2).mean(axis=0), expected, atol=5e-3)

    def test_variance_index_out_of_range(self):
        with pytest.raises(DirichletError):
            dirichlet.variance([1, 1, 1], 3)


class TestEntropy:
    def test_uniform_is_maximal(self):
        assert dirichlet.predictive_entropy([1, 1, 1]) == pytest.approx(np.log(3))

    def test_near_deterministic(self):
        assert dirichlet.predictive_entropy([1e6, 1, 1]) < 1e-3

    def test_value(self):
        assert dirichlet.predictive_entropy([4, 7, 17]) == pytest.approx(0.9276, abs=1e-3)

    def test_batch_matches_scalar(self, rng):
        alpha = rng.uniform(0.5, 20, (5, 4))
        expected = [dirichlet.predictive_entropy(row) for row in alpha]
        np.testing.assert_allclose(dirichlet.alpha_entropy(alpha), expected)


class TestKL:
    def test_zero_at_uniform(self):
        assert dirichlet.kl_to_uniform([1, 1, 1]) == pytest.approx(0.0, abs=1e-12)

    def test_closed_form(self):
        expected = np.log(3) + special.digamma(2) - special.digamma(4)
        assert dirichlet.kl_to_uniform([2, 1, 1]) == pytest.approx(expected)
        assert dirichlet.kl_to_uniform([2, 1, 1]) == pytest.approx(0.26528, abs=1e-5)

    def test_monte_carlo(self):
        alpha = np.array([2.0, 1.0, 1.0])
        draws = dirichlet.sample(alpha, seed=1, size=1_000_000)
        log_ratio = (special.gammaln(alpha.sum()) - special.gammaln(alpha).sum()
                     + np.sum((alpha - 1.0) * np.log(draws), axis=1) - special.gammaln(3))
        assert log_ratio.mean() == pytest.approx(dirichlet.kl_to_uniform(alpha), abs=5e-3)

    def test_non_negative(self, rng):
        alpha = rng.uniform(0.5, 20, (1000, 4))
        assert np.all(dirichlet.kl_to_uniform_batch(alpha) >= -1e-12)

    def test_strictly_positive_away_from_uniform(self, rng):
        alpha = rng.uniform(0.5, 20, (10_000, 4))
        assert not np.any(np.all(alpha == 1.0, axis=1))
        kl = dirichlet.kl_to_uniform_batch(alpha)
        assert np.all(kl > 0)
        np.testing.assert_allclose(kl[:20], [dirichlet.kl_to_uniform(row) for row in alpha[:20]])

    def test_rejects_non_positive(self):
        with pytest.raises(DirichletError):
            dirichlet.kl_to_uniform([1.0, 0.0])


class TestRemoveMisleading:
    @pytest.mark.parametrize('alpha, y, expected', [
        ([5, 3, 2], 0, [1, 3, 2]),
        ([1, 1, 1, 1], 2, [1, 1, 1, 1]),
        ([1, 9], 1, [1, 1]),
    ])
    def test_examples(self, alpha, y, expected):
        np.testing.assert_array_equal(dirichlet.remove_misleading(alpha, y).alpha, expected)

    def test_index_out_of_range(self):
        with pytest.raises(DirichletError):
            dirichlet.remove_misleading([1, 2], 2)

    def test_idempotent(self, rng):
        for _ in range(200):
            k = int(rng.integers(2, 8))
            alpha, y = rng.uniform(0.5, 20, k), int(rng.integers(k))
            once = dirichlet.remove_misleading(alpha, y)
            twice = dirichlet.remove_misleading(once.alpha, y)
            np.testing.assert_array_equal(twice.alpha, once.alpha)


class TestFuse:
    def test_concatenates(self):
        fused = dirichlet.fuse([2, 3], [4, 1, 1])
        np.testing.assert_array_equal(fused.alpha, [2, 3, 4, 1, 1])
        assert fused.labels == (0, 1, 2, 3, 4)
        assert dirichlet.mean(fused).p[0] == pytest.approx(2 / 11)

    def test_preserves_total_concentration(self, rng):
        for _ in range(50):
            a = DirichletParams(rng.uniform(0.5, 20, int(rng.integers(2, 6))))
            b = DirichletParams(rng.uniform(0.5, 20, int(rng.integers(2, 6))))
            assert dirichlet.fuse(a, b).total == pytest.approx(a.total + b.total)

    def test_empty_side_rejected(self):
        with pytest.raises(DirichletError):
            dirichlet.fuse([2, 3], [])

    def test_overlapping_labels_rejected(self):
        a = DirichletParams(np.array([2.0, 3.0]), labels=(0, 1))
        b = DirichletParams(np.array([1.0, 1.0]), labels=(1, 2))
        with pytest.raises(DirichletError, match='overlap'):
            dirichlet.fuse(a, b)

    def test_self_fusion_rejected(self):
        d = DirichletParams(np.array([2.0, 3.0]))
        with pytest.raises(DirichletError):
            dirichlet.fuse(d, d)

    def test_batch(self):
        alpha, labels = dirichlet.fuse_batch(np.ones((4, 2)), (0, 1), np.full((4, 3), 2.0), (5, 6, 7))
        assert alpha.shape == (4, 5)
        assert labels == (0, 1, 5, 6, 7)


class TestSample:
    def test_fixed_seed_repeats(self):
        first = dirichlet.sample([2, 3, 4], seed=7, size=10)
        second = dirichlet.sample([2, 3, 4], seed=7, size=10)
        np.testing.assert_array_equal(first, second)

    def test_single_draw_is_simplex_point(self):
        point = dirichlet.sample([0.3, 0.5], seed=0)
        assert isinstance(point, SimplexPoint)
        assert point.p.sum() == pytest.approx(1.0)
