"""
Tests for risk matrices, the pignistic prior, expected risk, the decision
policy and the REINFORCE head epoch.
"""

import numpy as np
import pytest

from data.dataset import Dataset
from data.risk_matrices import mnist_risk_matrix
from engine import ops
from engine.tensor import Tensor
from evidential import risk
from evidential.risk import PignisticHead, PignisticPrediction, RiskMatrix
from utils.errors import ContractError, RiskMatrixError, ShapeError


class StubModel:
    """Frozen model whose features and evidence are given directly."""

    def __init__(self, features, evidence, head=None, frozen=True):
        self.features = np.asarray(features, dtype=np.float64)
        self.evidence_values = np.asarray(evidence, dtype=np.float64)
        self.head = head or PignisticHead.initialize(self.evidence_values.shape[1], self.features.shape[1])
        self.frozen = frozen

    def is_frozen(self, group):
        return self.frozen

    def infer_features(self, samples):
        return self.features, self.evidence_values


def uniform_prediction(evidence):
    return PignisticPrediction.uniform(np.atleast_2d(np.asarray(evidence, dtype=np.float64)))


class TestRiskMatrix:
    def test_rejects_non_zero_diagonal(self):
        with pytest.raises(RiskMatrixError):
            RiskMatrix(np.ones((3, 3)))

    def test_rejects_negative_cost(self):
        with pytest.raises(RiskMatrixError):
            RiskMatrix(np.array([[0.0, -1.0], [1.0, 0.0]]))

    def test_rejects_non_square(self):
        with pytest.raises(RiskMatrixError):
            RiskMatrix(np.zeros((2, 3)))

    def test_csv_round_trip(self, tmp_path):
        path = tmp_path / 'costs.csv'
        mnist_risk_matrix(4).to_csv(path)
        np.testing.assert_array_equal(RiskMatrix.from_csv(path).values, mnist_risk_matrix(4).values)

    def test_csv_ragged(self, tmp_path):
        path = tmp_path / 'ragged.csv'
        path.write_text("0,1\n1,0,2\n")
        with pytest.raises(RiskMatrixError):
            RiskMatrix.from_csv(path)

    def test_rows_reject_out_of_range_labels(self):
        with pytest.raises(ShapeError):
            RiskMatrix.zeros(3).rows([0, 3])


class TestPignisticPrior:
    def test_zero_head_is_uniform(self):
        head = PignisticHead.initialize(10, 4)
        gamma = risk.pignistic_prior(np.ones((2, 4)), head, 10)
        np.testing.assert_allclose(gamma.data, np.ones((2, 10)))

    def test_bias_shifts_prior(self):
        head = PignisticHead(np.zeros((3, 2)), np.array([np.log(2.0), 0.0, 0.0]))
        gamma = risk.pignistic_prior(np.ones((1, 2)), head, 3)
        np.testing.assert_allclose(gamma.data, [[1.5, 0.75, 0.75]])

    def test_rows_sum_to_k(self, rng):
        head = PignisticHead.initialize(5, 3, method='gaussian', seed=1, sigma=2.0)
        gamma = risk.pignistic_prior(rng.normal(size=(20, 3)), head, 5)
        np.testing.assert_allclose(gamma.data.sum(axis=1), 5.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            risk.pignistic_prior(np.ones((1, 3)), PignisticHead.initialize(3, 2), 3)

    def test_prior_must_sum_to_k(self):
        with pytest.raises(ContractError):
            PignisticPrediction(np.zeros((1, 3)), np.full((1, 3), 0.5))

    def test_saturated_head_keeps_prior_positive(self):
        head = PignisticHead(np.zeros((3, 1)), np.array([800.0, 0.0, 0.0]))
        features = Tensor(np.ones((1, 1)))
        gamma = risk.pignistic_prior(features, head, 3)
        assert np.all(gamma.data > 0)
        assert gamma.data.sum() == pytest.approx(3.0)
        pred = PignisticPrediction(np.zeros((1, 3)), gamma)
        np.testing.assert_array_equal(risk.decide(pred), [0])
        assert np.all(np.isfinite(risk.policy(pred).data))
        np.testing.assert_allclose(risk.policy(pred).data, [[1.0, 0.0, 0.0]], atol=1e-12)

    def test_saturated_head_gradient_is_finite(self):
        head = PignisticHead(np.zeros((3, 1)), np.array([800.0, 0.0, 0.0]))
        gamma = risk.pignistic_prior(np.ones((1, 1)), head, 3)
        pred = PignisticPrediction(np.zeros((1, 3)), gamma)
        ops.sum(risk.expected_risk(pred, [1], mnist_risk_matrix(3))).backward()
        assert np.all(np.isfinite(head.bias.grad)) and np.all(np.isfinite(head.weight.grad))


class TestExpectedRisk:
    def test_zero_matrix(self, rng):
        pred = uniform_prediction(rng.exponential(2.0, (4, 3)))
        np.testing.assert_array_equal(risk.expected_risk(pred, [0, 1, 2, 0], RiskMatrix.zeros(3)).data, 0.0)

    def test_mnist_row_zero(self):
        value = risk.expected_risk(uniform_prediction(np.zeros(10)), [0], mnist_risk_matrix())
        assert value.data[0] == pytest.approx(28.5)

    def test_monte_carlo_with_sampled_actions(self, rng):
        R = mnist_risk_matrix(4)
        for _ in range(5):
            evidence = rng.exponential(2.0, 4)
            y = int(rng.integers(4))
            alpha = evidence + 1.0
            draws = rng.dirichlet(alpha, size=200_000)
            actions = (draws.cumsum(axis=1) > rng.uniform(size=(200_000, 1))).argmax(axis=1)
            costs = R.values[y, actions]
            estimate, stderr = costs.mean(), costs.std() / np.sqrt(costs.size)
            exact = risk.expected_risk(uniform_prediction(evidence), [y], R).data[0]
            assert estimate == pytest.approx(exact, rel=1e-2, abs=4 * stderr)

    def test_monte_carlo_with_pignistic_prior(self, rng):
        R = mnist_risk_matrix(6)
        failures = []
        for instance in range(100):
            K = R.K
            evidence = rng.exponential(2.0, K)
            prior = K * rng.dirichlet(np.full(K, 2.0))
            y = int(rng.integers(K))
            draws = rng.dirichlet(evidence + prior, size=50_000)
            costs = draws @ R.values[y]
            estimate, stderr = costs.mean(), costs.std() / np.sqrt(costs.size)
            pred = PignisticPrediction(evidence[None], prior[None])
            exact = risk.expected_risk(pred, [y], R).data[0]
            if abs(estimate - exact) > max(1e-2 * exact, 5 * stderr):
                failures.append((instance, estimate, exact))
        assert failures == []

    def test_penalty(self):
        pred = uniform_prediction(np.zeros(10))
        assert risk.risk_edl_penalty(pred, [0], mnist_risk_matrix(), kappa=0.01).data[0] == pytest.approx(2.85)
        assert risk.risk_edl_penalty(pred, [0], RiskMatrix.zeros(10)).data[0] == 0.0

    def test_penalty_is_scaled_numerator(self, rng):
        R = mnist_risk_matrix(5)
        evidence = rng.exponential(3.0, (6, 5))
        labels = rng.integers(0, 5, 6)
        pred = uniform_prediction(evidence)
        penalty = risk.risk_edl_penalty(pred, labels, R, kappa=0.5).data
        expected = 0.5 * (5 + evidence.sum(axis=1)) * risk.expected_risk(pred, labels, R).data
        np.testing.assert_allclose(penalty, expected)

    def test_negative_kappa(self):
        with pytest.raises(ContractError):
            risk.risk_edl_penalty(uniform_prediction(np.zeros(3)), [0], RiskMatrix.zeros(3), kappa=-1.0)


class TestPolicy:
    def test_zero_evidence_follows_prior(self):
        prior = np.array([[0.5, 2.0, 0.5]])
        probs = risk.policy(PignisticPrediction(np.zeros((1, 3)), prior)).data
        np.testing.assert_allclose(probs, prior / 3)

    def test_dominant_evidence(self):
        np.testing.assert_allclose(risk.policy(uniform_prediction([6, 0, 0])).data, [[7 / 9, 1 / 9, 1 / 9]])

    def test_rows_sum_to_one(self, rng):
        head = PignisticHead.initialize(4, 2, method='gaussian', sigma=1.0)
        pred = PignisticPrediction(rng.exponential(2.0, (10, 4)), head(rng.normal(size=(10, 2))))
        np.testing.assert_allclose(risk.policy(pred).data.sum(axis=1), 1.0)

    @pytest.mark.parametrize('evidence, prior, expected', [
        ([6, 0, 0], [1, 1, 1], 0),
        ([0, 0, 0], [0.5, 2.0, 0.5], 1),
        ([1, 1, 1], [1, 1, 1], 0),
    ])
    def test_decide(self, evidence, prior, expected):
        pred = PignisticPrediction(np.array([evidence], dtype=float), np.array([prior], dtype=float))
        assert risk.decide(pred)[0] == expected


class TestPolicyGradient:
    def test_requires_frozen_model(self):
        model = StubModel(np.ones((2, 2)), np.zeros((2, 3)), frozen=False)
        data = Dataset(np.zeros((2, 2)), [0, 1], 3)
        with pytest.raises(ContractError):
            risk.pg_epoch(model, data, RiskMatrix.zeros(3), lr=0.1, seed=0)

    def test_zero_costs_leave_head_unchanged(self, rng):
        head = PignisticHead.initialize(3, 2, method='gaussian', sigma=0.5)
        before = [p.data.copy() for p in head.parameters()]
        model = StubModel(rng.normal(size=(30, 2)), rng.exponential(1.0, (30, 3)), head)
        data = Dataset(np.zeros((30, 2)), rng.integers(0, 3, 30), 3)
        log = risk.pg_epoch(model, data, RiskMatrix.zeros(3), lr=0.5, seed=0)
        for old, param in zip(before, head.parameters()):
            np.testing.assert_array_equal(param.data, old)
        assert log.queries == 30
        assert sorted(log.order) == list(range(30))

    def test_costly_action_becomes_less_likely(self):
        R = RiskMatrix(np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]))
        data = Dataset(np.zeros((1, 2)), [0], 3)
        for seed in range(20):
            head = PignisticHead.initialize(3, 2)
            model = StubModel([[1.0, -0.5]], [[0.0, 5.0, 5.0]], head)
            features = Tensor(model.features)
            before = risk.policy(PignisticPrediction(Tensor(model.evidence_values), head(features))).data[0]
            log = risk.pg_epoch(model, data, R, lr=0.5, seed=seed)
            if log.costs[0] > 0:
                after = risk.policy(PignisticPrediction(Tensor(model.evidence_values), head(features))).data[0]
                action = log.actions[0]
                assert np.log(after[action]) < np.log(before[action])
                return
        pytest.fail("no costly action sampled in 20 seeds")

    def test_learns_to_avoid_costly_classes(self, rng):
        R = RiskMatrix(np.array([[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]))
        n = 200
        features = np.column_stack([np.ones(n), rng.normal(0, 0.1, n)])
        model = StubModel(features, np.zeros((n, 3)))
        data = Dataset(np.zeros((n, 2)), np.zeros(n, dtype=int), 3)
        gen = np.random.default_rng(5)
        for _ in range(50):
            log = risk.pg_epoch(model, data, R, lr=0.01, seed=gen)
        gamma = model.head(Tensor(features)).data
        assert int(np.argmax(gamma.mean(axis=0))) == 0
        assert log.mean_cost < 1.0

    def test_shuffle_is_seeded(self, rng):
        model = StubModel(rng.normal(size=(10, 2)), np.zeros((10, 3)))
        data = Dataset(np.zeros((10, 2)), np.zeros(10, dtype=int), 3)
        first = risk.pg_epoch(model, data, RiskMatrix.zeros(3), lr=0.1, seed=3)
        second = risk.pg_epoch(model, data, RiskMatrix.zeros(3), lr=0.1, seed=3)
        assert first.order == second.order and first.actions == second.actions


def test_cost_oracle_counts_queries():
    oracle = risk.CostOracle(mnist_risk_matrix(3), np.array([0, 2]))
    assert oracle.query(0, 2) == 4.0
    assert oracle.query(1, 0) == 2.0
    assert oracle.queries == 2
