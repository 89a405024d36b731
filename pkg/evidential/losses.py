"""
Evidential Losses

Responsible for:
- evidence activations (relu, softplus, exp, clamped exp with a straight-through term)
- the annealing coefficient for the KL regularizer
- the Bayes risk of the sum-of-squares loss under Dir(alpha), split into error and variance parts
- the total evidential objective (SSE + annealed KL on misleading evidence)
- cross-entropy and its cost-regularized variant for the softmax baselines

Batch losses are summed over samples, except cross-entropy which is averaged.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import gammaln

from engine import ops
from engine.tensor import Tensor
from evidential.dirichlet import _params
from utils.errors import ContractError, DirichletError

ACTIVATIONS = ('relu', 'softplus', 'exp', 'clamped-exp')


@dataclass(frozen=True)
class EvidenceActivation:
    """Maps logits to non-negative evidence."""
    kind: str = 'softplus'
    clamp: float = 10.0

    def __post_init__(self):
        if self.kind not in ACTIVATIONS:
            raise ContractError(f"unknown evidence activation '{self.kind}' (choose from {', '.join(ACTIVATIONS)})")

    def __call__(self, logits: Tensor) -> Tensor:
        return evidence(logits, self)


@dataclass(frozen=True)
class AnnealSchedule:
    """lambda_t = min(1, t / horizon) with a 1-based epoch t; t = 0 means "before training" (lambda = 0)."""
    horizon: int = 10
    epoch: int = 1

    def __post_init__(self):
        if self.horizon <= 0:
            raise ContractError(f"anneal horizon must be positive, got {self.horizon}")
        if self.epoch < 0:
            raise ContractError(f"epoch must be >= 0, got {self.epoch}")

    def at(self, epoch: int) -> 'AnnealSchedule':
        return AnnealSchedule(self.horizon, epoch)


def anneal(sched: AnnealSchedule) -> float:
    return min(1.0, sched.epoch / sched.horizon)


def evidence(logits: Tensor, act: EvidenceActivation) -> Tensor:
    """
    Apply the evidence activation elementwise.

    clamped-exp is exp(min(x, clamp)) + (x - bg(x)), where bg blocks the
    gradient: the second term is zero in value and contributes a gradient of
    1 everywhere.
    """
    if act.kind == 'relu':
        return ops.relu(logits)
    if act.kind == 'softplus':
        return ops.softplus(logits)
    if act.kind == 'exp':
        return ops.exp(logits)
    return ops.exp(ops.minimum(logits, act.clamp)) + (logits - ops.stop_gradient(logits))


# ---------------------------------------------------------------------- #
# SSE Bayes risk
# ---------------------------------------------------------------------- #
def sse_components(alpha, y: int) -> Tuple[np.ndarray, np.ndarray]:
    """Per-category error and variance terms (y_j - p_j)^2 and p_j (1 - p_j) / (alpha_0 + 1)."""
    d = _params(alpha)
    if not 0 <= y < d.K:
        raise DirichletError(f"class index {y} out of range for K={d.K}")
    p = d.alpha / d.total
    target = np.zeros(d.K)
    target[y] = 1.0
    return (target - p) ** 2, p * (1.0 - p) / (d.total + 1.0)


def sse_bayes_risk(alpha, y: int) -> Tuple[float, float, float]:
    """
    Expected squared error of a one-hot target under Dir(alpha).

    Returns:
        (total, err_part, var_part) with total = err_part + var_part
    """
    err, var = sse_components(alpha, y)
    return float(err.sum() + var.sum()), float(err.sum()), float(var.sum())


def sse_terms(alpha: Tensor, labels) -> Tuple[Tensor, Tensor]:
    """Batched error and variance parts, each of shape (N,)."""
    target = ops.one_hot(labels, alpha.shape[1])
    strength = ops.sum(alpha, axis=1, keepdims=True)
    p = alpha / strength
    err = ops.sum(ops.square(target - p), axis=1)
    var = ops.sum(p * (1.0 - p) / (strength + 1.0), axis=1)
    return err, var


def kl_uniform(alpha_tilde: Tensor) -> Tensor:
    """Differentiable KL(Dir(alpha~) || Dir(1)) per row, shape (N,)."""
    k = alpha_tilde.shape[1]
    strength = ops.sum(alpha_tilde, axis=1, keepdims=True)
    log_norm = ops.lgamma(ops.reshape(strength, (-1,))) - ops.sum(ops.lgamma(alpha_tilde), axis=1)
    digamma_gap = ops.digamma(alpha_tilde) - ops.digamma(strength)
    return log_norm - float(gammaln(k)) + ops.sum((alpha_tilde - 1.0) * digamma_gap, axis=1)


def strip_correct_evidence(alpha: Tensor, labels) -> Tensor:
    """Batched remove_misleading: the true class concentration becomes exactly 1."""
    target = ops.one_hot(labels, alpha.shape[1])
    return alpha * (1.0 - target) + target


def edl_total_loss(alpha: Tensor, labels, sched: AnnealSchedule) -> Tensor:
    """
    Sum over the batch of SSE Bayes risk + lambda_t * KL(Dir(alpha~) || Dir(1)).

    Raises:
        ContractError: empty batch
    """
    labels = np.asarray(labels, dtype=np.int64)
    if alpha.shape[0] == 0 or labels.size == 0:
        raise ContractError("edl_total_loss: empty batch")
    err, var = sse_terms(alpha, labels)
    loss = ops.sum(err + var)
    lam = anneal(sched)
    if lam > 0.0:
        loss = loss + lam * ops.sum(kl_uniform(strip_correct_evidence(alpha, labels)))
    return loss


# ---------------------------------------------------------------------- #
# Softmax baselines
# ---------------------------------------------------------------------- #
def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean of -log softmax_y(logits)."""
    return -ops.mean(ops.gather(ops.log_softmax(logits), labels))


def cost_sensitive_cross_entropy(logits: Tensor, labels, risk_rows: np.ndarray, weight: float) -> Tensor:
    """
    Cross-entropy plus weight times the expected cost under the softmax.

    Args:
        logits: (N, K) logits
        labels: (N,) true classes
        risk_rows: (N, K) rows R[y_i] of the risk matrix
        weight: Regularization weight
    """
    expected_cost = ops.sum(ops.softmax(logits) * risk_rows, axis=1)
    return cross_entropy(logits, labels) + weight * ops.mean(expected_cost)


def alpha_from_evidence(evidence_values: Tensor) -> Tensor:
    """alpha = c + 1 (uniform prior beta)."""
    return evidence_values + 1.0


__all__ = [
    'ACTIVATIONS', 'EvidenceActivation', 'AnnealSchedule', 'anneal', 'evidence',
    'sse_components', 'sse_bayes_risk', 'sse_terms', 'kl_uniform', 'strip_correct_evidence',
    'edl_total_loss', 'cross_entropy', 'cost_sensitive_cross_entropy', 'alpha_from_evidence',
]
