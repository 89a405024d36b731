"""
Training Regimes

Responsible for:
- softmax pretraining (cross-entropy) and its cost-regularized variant
- evidential training from scratch
- evidential fine-tuning of a softmax-pretrained model
- risk-aware training: riskEDL jointly, or the pignistic head alone by
  minimizing expected risk (p) or by policy gradient with bandit feedback (pg)

Every regime is deterministic in its seed: the shuffling order of each
phase comes from its own numpy Generator stream. Per-epoch progress is kept
on model.history as EpochRecord rows.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from data.dataset import Dataset
from engine import ops
from engine.optim import Adam
from engine.tensor import Tensor
from evidential.losses import (
    AnnealSchedule,
    EvidenceActivation,
    alpha_from_evidence,
    anneal,
    cost_sensitive_cross_entropy,
    cross_entropy,
    edl_total_loss,
)
from evidential.risk import (
    PignisticPrediction,
    RiskMatrix,
    expected_risk,
    pg_epoch,
    pignistic_prior,
    risk_edl_penalty,
)
from models.backbones import BackboneSpec
from models.evidence_model import EVIDENTIAL_MODES, SOFTMAX_MODES, EvidenceModel
from utils.errors import ContractError

logger = logging.getLogger(__name__)

DEFAULT_BATCH_SIZE = 64
RISK_MODES = {'riskEDL': 'risk-edl', 'risk-edl': 'risk-edl',
              'p': 'edl-p', 'edl-p': 'edl-p',
              'pg': 'edl-pg', 'edl-pg': 'edl-pg'}

# Generator streams per phase, combined with the user seed
_SHUFFLE, _RISK_SHUFFLE, _BANDIT = 1, 2, 3


@dataclass
class EpochRecord:
    """One row of the training log."""
    epoch: int
    loss: float
    lam: float
    acc: float
    cost: Optional[float] = None

    def as_row(self) -> dict:
        row = asdict(self)
        row['lambda'] = row.pop('lam')
        return row


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng((int(seed), stream))


def _require_data(data: Dataset) -> None:
    if len(data) == 0:
        raise ContractError(f"cannot train on empty dataset '{data.name}'")


def _score(model: EvidenceModel, data: Dataset, R: Optional[RiskMatrix]):
    preds = model.predict(data.samples)
    acc = float(np.mean(preds == data.labels))
    cost = float(np.mean(R.values[data.labels, preds])) if R is not None else None
    return acc, cost


def _record(model: EvidenceModel, data: Dataset, epoch: int, loss: float, lam: float,
            R: Optional[RiskMatrix] = None) -> EpochRecord:
    acc, cost = _score(model, data, R)
    record = EpochRecord(epoch, loss, lam, acc, cost)
    model.history.append(record)
    cost_text = f" cost={cost:.4f}" if cost is not None else ''
    logger.info(f"[{model.mode}] epoch {epoch}: loss={loss:.6f} lambda={lam:.2f} acc={acc:.4f}{cost_text}")
    return record


def _fit(model: EvidenceModel, data: Dataset, epochs: int, lr: float, seed: int, batch_size: int,
         batch_loss: Callable[[EvidenceModel, np.ndarray, np.ndarray, int], Tensor],
         lam_at: Callable[[int], float] = lambda epoch: 0.0,
         R: Optional[RiskMatrix] = None, stream: int = _SHUFFLE) -> EvidenceModel:
    """Shared minibatch Adam loop over model.trainable_parameters()."""
    _require_data(data)
    optimizer = Adam(model.trainable_parameters(), lr=lr)
    rng = _rng(seed, stream)
    model.history = []
    for epoch in range(1, epochs + 1):
        total = 0.0
        for batch in data.batches(batch_size, rng):
            loss = batch_loss(model, data.samples[batch], data.labels[batch], epoch)
            loss.backward()
            optimizer.step()
            total += loss.item()
        _record(model, data, epoch, total / len(data), lam_at(epoch), R)
    return model


# ---------------------------------------------------------------------- #
# Softmax baselines
# ---------------------------------------------------------------------- #
def pretrain_softmax(spec: BackboneSpec, data: Dataset, epochs: int, lr: float = 1e-3, seed: int = 0,
                     batch_size: int = DEFAULT_BATCH_SIZE) -> EvidenceModel:
    """
    Train a softmax classifier with cross-entropy.

    Args:
        spec: Backbone architecture
        data: Labelled training data
        epochs: Passes over the data (0 returns the seeded initialization)
        lr: Adam learning rate
        seed: Initialization and shuffling seed

    Returns:
        EvidenceModel: tagged mode='softmax'
    """
    _require_data(data)
    model = EvidenceModel.create(spec, data.feature_shape, data.num_classes, mode='softmax',
                                 activation=None, seed=seed, labels=data.label_ids)

    def batch_loss(m, x, y, epoch):
        n = y.shape[0]
        return float(n) * cross_entropy(m.forward(x)[1], y)

    return _fit(model, data, epochs, lr, seed, batch_size, batch_loss)


def train_cost_sensitive(spec: BackboneSpec, data: Dataset, R: RiskMatrix, epochs: int, lr: float = 1e-3,
                         weight: float = 0.1, seed: int = 0,
                         batch_size: int = DEFAULT_BATCH_SIZE) -> EvidenceModel:
    """Softmax classifier trained on cross-entropy + weight * expected cost under the softmax."""
    _require_data(data)
    if R.K != data.num_classes:
        raise ContractError(f"risk matrix is {R.K}x{R.K} but data has K={data.num_classes}")
    model = EvidenceModel.create(spec, data.feature_shape, data.num_classes, mode='cs-softmax',
                                 activation=None, seed=seed, labels=data.label_ids)

    def batch_loss(m, x, y, epoch):
        n = y.shape[0]
        return float(n) * cost_sensitive_cross_entropy(m.forward(x)[1], y, R.rows(y), weight)

    return _fit(model, data, epochs, lr, seed, batch_size, batch_loss, R=R)


# ---------------------------------------------------------------------- #
# Evidential training
# ---------------------------------------------------------------------- #
def _edl_batch_loss(sched: AnnealSchedule):
    def batch_loss(m, x, y, epoch):
        alpha = alpha_from_evidence(m.evidence(x))
        return edl_total_loss(alpha, y, sched.at(epoch))
    return batch_loss


def train_edl(spec: BackboneSpec, data: Dataset, epochs: int, lr: float = 1e-3, act: str = 'softplus',
              seed: int = 0, anneal_horizon: int = 10, batch_size: int = DEFAULT_BATCH_SIZE) -> EvidenceModel:
    """
    Train an evidential model from scratch with the SSE Bayes risk plus annealed KL.

    At inference alpha = evidence + 1.
    """
    _require_data(data)
    EvidenceActivation(act)
    model = EvidenceModel.create(spec, data.feature_shape, data.num_classes, mode='edl',
                                 activation=act, seed=seed, labels=data.label_ids)
    sched = AnnealSchedule(anneal_horizon)
    return _fit(model, data, epochs, lr, seed, batch_size, _edl_batch_loss(sched),
                lam_at=lambda epoch: anneal(sched.at(epoch)))


def finetune_edl(pretrained: EvidenceModel, data: Dataset, epochs: int = 10, lr: float = 1e-5,
                 act: str = 'clamped-exp', seed: int = 0, anneal_horizon: int = 10,
                 batch_size: int = DEFAULT_BATCH_SIZE) -> EvidenceModel:
    """
    Continue training a softmax-pretrained model under the evidential loss.

    The logits layer is kept and reinterpreted through the evidence
    activation. The annealing clock restarts at epoch 1 of the tuning phase.

    Raises:
        ContractError: the model was not trained with a softmax objective
    """
    if pretrained.mode not in SOFTMAX_MODES:
        raise ContractError(f"finetune_edl needs a softmax-pretrained model, got mode '{pretrained.mode}'")
    _require_data(data)
    EvidenceActivation(act)
    model = pretrained.clone()
    model.mode = 'edl'
    model.activation = act
    model.unfreeze('backbone', 'logits')
    sched = AnnealSchedule(anneal_horizon)
    return _fit(model, data, epochs, lr, seed, batch_size, _edl_batch_loss(sched),
                lam_at=lambda epoch: anneal(sched.at(epoch)))


# ---------------------------------------------------------------------- #
# Risk-aware training
# ---------------------------------------------------------------------- #
def _train_risk_edl(model: EvidenceModel, data: Dataset, R: RiskMatrix, epochs: int, lr: float,
                    kappa: float, seed: int, anneal_horizon: int, batch_size: int) -> EvidenceModel:
    model.mode = 'risk-edl'
    model.head = None
    model.unfreeze('backbone', 'logits')
    sched = AnnealSchedule(anneal_horizon)

    def batch_loss(m, x, y, epoch):
        evidence_values = m.evidence(x)
        penalty = risk_edl_penalty(PignisticPrediction.uniform(evidence_values), y, R, kappa)
        return edl_total_loss(alpha_from_evidence(evidence_values), y, sched.at(epoch)) + ops.sum(penalty)

    return _fit(model, data, epochs, lr, seed, batch_size, batch_loss,
                lam_at=lambda epoch: anneal(sched.at(epoch)), R=R, stream=_RISK_SHUFFLE)


def _train_head_p(model: EvidenceModel, data: Dataset, R: RiskMatrix, epochs: int, lr: float, seed: int,
                  batch_size: int, cache) -> None:
    features, evidence_values = cache
    head = model.head
    optimizer = Adam(head.parameters(), lr=lr)
    rng = _rng(seed, _RISK_SHUFFLE)
    for epoch in range(1, epochs + 1):
        total = 0.0
        for batch in data.batches(batch_size, rng):
            prior = pignistic_prior(features[batch], head, model.num_classes)
            pred = PignisticPrediction(Tensor(evidence_values[batch]), prior)
            loss = ops.sum(expected_risk(pred, data.labels[batch], R))
            loss.backward()
            optimizer.step()
            total += loss.item()
        _record(model, data, epoch, total / len(data), 0.0, R)


def _train_head_pg(model: EvidenceModel, data: Dataset, R: RiskMatrix, epochs: int, lr: float, seed: int,
                   cache) -> None:
    rng = _rng(seed, _BANDIT)
    for epoch in range(1, epochs + 1):
        log = pg_epoch(model, data, R, lr, rng, cache=cache)
        logger.debug(f"[edl-pg] epoch {epoch}: {log.queries} cost queries")
        _record(model, data, epoch, log.mean_cost, 0.0, R)


def train_risk(model: EvidenceModel, data: Dataset, R: RiskMatrix, mode: str, epochs: int,
               lr: float = 1e-3, kappa: float = 0.01, seed: int = 0, anneal_horizon: int = 10,
               head_init: str = 'zero', act: str = 'softplus',
               batch_size: int = DEFAULT_BATCH_SIZE) -> EvidenceModel:
    """
    Risk-aware training.

    Args:
        model: Starting model. riskEDL accepts any model (a softmax model is
            converted with `act`); p and pg need a trained evidential model
        data: Labelled training data
        R: Risk matrix
        mode: 'riskEDL' / 'risk-edl', 'p' / 'edl-p' or 'pg' / 'edl-pg'
        epochs: Passes over the data
        lr: Learning rate (Adam for riskEDL and p, plain SGD steps for pg)
        kappa: Weight of the riskEDL penalty
        seed: Shuffling, head-initialization and action-sampling seed
        head_init: 'zero' or 'gaussian' initialization of a new pignistic head

    Returns:
        EvidenceModel: a trained copy tagged risk-edl, edl-p or edl-pg

    Raises:
        ContractError: unknown mode, p/pg on a non-evidential model, K mismatch,
            or frozen parameters changed during training
    """
    if mode not in RISK_MODES:
        raise ContractError(f"unknown risk mode '{mode}' (choose from riskEDL, p, pg)")
    mode = RISK_MODES[mode]
    _require_data(data)
    if R.K != model.num_classes or data.num_classes != model.num_classes:
        raise ContractError(f"K mismatch: model {model.num_classes}, data {data.num_classes}, risk matrix {R.K}")

    model = model.clone()
    if mode == 'risk-edl':
        if model.activation is None:
            EvidenceActivation(act)
            model.activation = act
        return _train_risk_edl(model, data, R, epochs, lr, kappa, seed, anneal_horizon, batch_size)

    if model.mode not in EVIDENTIAL_MODES:
        raise ContractError(f"mode {mode} needs a trained evidential model, got mode '{model.mode}'")
    if model.head is None:
        model.attach_head(head_init, seed)
    model.freeze('backbone', 'logits')
    model.unfreeze('head')
    model.mode = mode
    model.history = []
    before = model.digest()
    cache = model.infer_features(data.samples)
    if mode == 'edl-p':
        _train_head_p(model, data, R, epochs, lr, seed, batch_size, cache)
    else:
        _train_head_pg(model, data, R, epochs, lr, seed, cache)
    if model.digest() != before:
        raise ContractError(f"{mode}: frozen parameters changed during head training")
    return model
