"""
Risk-Aware Decisions

Responsible for:
- risk matrices R (R[k][i] = cost of predicting i when the truth is k)
- the pignistic prior head gamma(x) = K * softmax(W g(x) + b), which
  redistributes K prior counts per sample
- expected risk under Dir(c + gamma) and the riskEDL penalty (its numerator)
- the decision policy P(i | x) = (c_i + gamma_i) / (K + sum c) and decide()
- one epoch of REINFORCE on the head with bandit feedback

Batch functions take (N, K) evidence/prior tensors and return (N,) values.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from engine import ops
from engine.optim import sgd_step
from engine.tensor import Tensor, as_tensor
from utils.errors import ContractError, RiskMatrixError, ShapeError

logger = logging.getLogger(__name__)

# gamma = K * softmax underflows to exactly 0 once two head logits differ by ~745
PRIOR_FLOOR = float(np.finfo(np.float64).tiny)


# ---------------------------------------------------------------------- #
# Risk matrix
# ---------------------------------------------------------------------- #
@dataclass(frozen=True)
class RiskMatrix:
    """K x K non-negative misclassification costs with a zero diagonal."""
    values: np.ndarray
    name: str = 'custom'

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1] or values.shape[0] < 2:
            raise RiskMatrixError(f"risk matrix must be square with K >= 2, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise RiskMatrixError("risk matrix contains non-finite entries")
        if np.any(values < 0):
            raise RiskMatrixError("risk matrix contains negative costs")
        if np.any(np.diag(values) != 0):
            raise RiskMatrixError("risk matrix diagonal must be zero (correct decisions cost nothing)")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @property
    def K(self) -> int:
        return self.values.shape[0]

    def cost(self, y: int, i: int) -> float:
        return float(self.values[y, i])

    def rows(self, labels) -> np.ndarray:
        """Rows R[y] for a batch of labels, shape (N, K)."""
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size and (labels.min() < 0 or labels.max() >= self.K):
            raise ShapeError(f"labels outside [0, {self.K}) for a {self.K}-class risk matrix")
        return self.values[labels]

    @classmethod
    def zeros(cls, k: int) -> 'RiskMatrix':
        return cls(np.zeros((k, k)), name='zero')

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> 'RiskMatrix':
        """
        Load K rows of K comma-separated non-negative decimals.

        Raises:
            RiskMatrixError: unreadable file, ragged rows, negative entries or non-zero diagonal
        """
        path = Path(path)
        try:
            rows = [line.strip() for line in path.read_text(encoding='utf-8').splitlines() if line.strip()]
            values = [[float(cell) for cell in row.split(',')] for row in rows]
        except (OSError, ValueError) as exc:
            raise RiskMatrixError(f"cannot read risk matrix {path}: {exc}") from exc
        if not values or any(len(row) != len(values) for row in values):
            raise RiskMatrixError(f"risk matrix {path} is not square")
        logger.debug(f"Loaded {len(values)}x{len(values)} risk matrix from {path}")
        return cls(np.array(values), name=path.stem)

    def to_csv(self, path: Union[str, Path]) -> None:
        lines = [','.join(repr(float(v)) for v in row) for row in self.values]
        Path(path).write_text('\n'.join(lines) + '\n', encoding='utf-8')


# ---------------------------------------------------------------------- #
# Pignistic head
# ---------------------------------------------------------------------- #
class PignisticHead:
    """
    Linear head on the penultimate features: gamma = K * softmax(W g + b).

    Args:
        weight: (K, D) matrix W
        bias: (K,) vector b
    """

    def __init__(self, weight: np.ndarray, bias: np.ndarray):
        self.weight = Tensor(weight, requires_grad=True, name='head.weight')
        self.bias = Tensor(bias, requires_grad=True, name='head.bias')
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(f"head weight {self.weight.shape} and bias {self.bias.shape} do not agree")

    @classmethod
    def initialize(cls, num_classes: int, feature_dim: int, method: str = 'zero',
                   seed: int = 0, sigma: float = 0.01) -> 'PignisticHead':
        """Zero init gives an exactly uniform prior; 'gaussian' draws N(0, sigma^2) weights."""
        if method == 'zero':
            return cls(np.zeros((num_classes, feature_dim)), np.zeros(num_classes))
        if method == 'gaussian':
            rng = np.random.default_rng((seed, 7))
            return cls(rng.normal(0.0, sigma, (num_classes, feature_dim)), rng.normal(0.0, sigma, num_classes))
        raise ContractError(f"unknown head initialization '{method}'")

    @property
    def num_classes(self) -> int:
        return self.weight.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weight.shape[1]

    def parameters(self) -> List[Tensor]:
        return [self.weight, self.bias]

    def __call__(self, features) -> Tensor:
        return pignistic_prior(features, self, self.num_classes)


def pignistic_prior(features, head: PignisticHead, K: int) -> Tensor:
    """
    K * softmax(W g + b) for a batch of features (N, D); rows sum to K.

    Entries where the softmax underflows to zero are lifted to the smallest
    positive float so alpha = c + gamma stays strictly positive. The lift is a
    constant and does not change the gradient.
    """
    features = as_tensor(features)
    if features.ndim != 2 or features.shape[1] != head.feature_dim:
        raise ShapeError(f"pignistic_prior: features {features.shape} do not match head weight {head.weight.shape}")
    if head.num_classes != K:
        raise ShapeError(f"pignistic_prior: head has {head.num_classes} outputs, expected K={K}")
    logits = ops.matmul(features, ops.transpose(head.weight, (1, 0))) + head.bias
    gamma = float(K) * ops.softmax(logits)
    underflow = gamma.data < PRIOR_FLOOR
    if np.any(underflow):
        logger.debug(f"pignistic_prior: {int(underflow.sum())} prior entries underflowed, lifted to {PRIOR_FLOOR}")
        gamma = gamma + Tensor(np.where(underflow, PRIOR_FLOOR, 0.0))
    return gamma


@dataclass
class PignisticPrediction:
    """Evidence c, pignistic prior gamma (rows sum to K) and alpha = c + gamma, all (N, K)."""
    evidence: Tensor
    prior: Tensor

    def __post_init__(self):
        self.evidence = as_tensor(self.evidence)
        self.prior = as_tensor(self.prior)
        if self.evidence.ndim == 1:
            self.evidence = ops.reshape(self.evidence, (1, -1))
        if self.prior.ndim == 1:
            self.prior = ops.reshape(self.prior, (1, -1))
        if self.evidence.shape != self.prior.shape:
            raise ShapeError(f"evidence {self.evidence.shape} and prior {self.prior.shape} differ")
        if np.any(self.evidence.data < 0):
            raise ContractError("evidence must be non-negative")
        if np.any(self.prior.data <= 0) or np.any(np.abs(self.prior.data.sum(axis=1) - self.K) > 1e-9):
            raise ContractError("pignistic prior must be positive and sum to K")

    @classmethod
    def uniform(cls, evidence) -> 'PignisticPrediction':
        """Prediction with the plain all-ones prior (no head)."""
        evidence = as_tensor(evidence)
        return cls(evidence, Tensor(np.ones(evidence.shape)))

    @property
    def K(self) -> int:
        return self.evidence.shape[1]

    @property
    def alpha(self) -> Tensor:
        return self.evidence + self.prior


def _denominator(pred: PignisticPrediction) -> Tensor:
    return float(pred.K) + ops.sum(pred.evidence, axis=1)


def expected_risk(pred: PignisticPrediction, labels, R: RiskMatrix) -> Tensor:
    """sum_i R[y][i] (c_i + gamma_i) / (K + sum_j c_j), per sample."""
    rows = R.rows(np.atleast_1d(labels))
    return ops.sum(pred.alpha * rows, axis=1) / _denominator(pred)


def risk_edl_penalty(pred: PignisticPrediction, labels, R: RiskMatrix, kappa: float = 0.01) -> Tensor:
    """kappa * sum_i R[y][i] (c_i + gamma_i): expected_risk without the denominator."""
    if kappa < 0:
        raise ContractError(f"kappa must be non-negative, got {kappa}")
    rows = R.rows(np.atleast_1d(labels))
    return kappa * ops.sum(pred.alpha * rows, axis=1)


def policy(pred: PignisticPrediction) -> Tensor:
    """P(i | x) = (c_i + gamma_i) / (K + sum_j c_j); each row is a point of the simplex."""
    return pred.alpha / ops.reshape(_denominator(pred), (-1, 1))


def decide(pred: PignisticPrediction) -> np.ndarray:
    """argmax_i (c_i + gamma_i) per sample, ties to the lowest index."""
    return np.argmax(pred.alpha.data, axis=1)


# ---------------------------------------------------------------------- #
# Policy gradient with bandit feedback
# ---------------------------------------------------------------------- #
class CostOracle:
    """Reveals R[y][i] for one (sample, action) pair at a time and counts the queries."""

    def __init__(self, R: RiskMatrix, labels: np.ndarray):
        self._R = R
        self._labels = np.asarray(labels, dtype=np.int64)
        self.queries = 0

    def query(self, index: int, action: int) -> float:
        self.queries += 1
        return self._R.cost(int(self._labels[index]), int(action))


@dataclass
class BanditLog:
    """Sampled actions and incurred costs, in visiting order."""
    order: List[int] = field(default_factory=list)
    actions: List[int] = field(default_factory=list)
    costs: List[float] = field(default_factory=list)
    queries: int = 0

    @property
    def mean_cost(self) -> float:
        return float(np.mean(self.costs)) if self.costs else 0.0


def pg_epoch(model, data, R: RiskMatrix, lr: float, seed: Union[int, np.random.Generator],
             cache: Optional[tuple] = None) -> BanditLog:
    """
    One REINFORCE epoch over the dataset for the pignistic head only.

    For every sample (seeded shuffled order) draw i ~ P(i|x), observe only
    R[y][i], and step Theta <- Theta - lr * R[y][i] * grad log P(i|x).

    Args:
        model: EvidenceModel with frozen backbone and logits, and a pignistic head
        data: Dataset with samples and labels
        R: Risk matrix (read only through a CostOracle)
        lr: Step size
        seed: Integer seed or Generator for the visiting order and the action draws
        cache: Optional precomputed (features, evidence) arrays for data.samples

    Returns:
        BanditLog: The sequence of sampled actions and incurred costs

    Raises:
        ContractError: backbone or logits not frozen, or no head attached
    """
    if not (model.is_frozen('backbone') and model.is_frozen('logits')):
        raise ContractError("pg_epoch: backbone and evidence head must be frozen")
    if model.head is None:
        raise ContractError("pg_epoch: model has no pignistic head")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    features, evidence_values = cache if cache is not None else model.infer_features(data.samples)

    head = model.head
    K = head.num_classes
    oracle = CostOracle(R, data.labels)
    log = BanditLog()
    for index in rng.permutation(len(data.labels)):
        prior = pignistic_prior(features[index:index + 1], head, K)
        probs = policy(PignisticPrediction(Tensor(evidence_values[index:index + 1]), prior))
        weights = probs.data[0] / probs.data[0].sum()
        action = int(rng.choice(K, p=weights))
        cost = oracle.query(index, action)
        log.order.append(int(index))
        log.actions.append(action)
        log.costs.append(cost)
        if cost == 0.0:
            continue
        objective = cost * ops.sum(ops.log(ops.gather(probs, [action])))
        objective.backward()
        sgd_step(head.parameters(), lr)
    log.queries = oracle.queries
    return log
