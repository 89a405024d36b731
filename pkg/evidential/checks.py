"""
Gradient-check cases for the evidential loss heads.

Covers the SSE Bayes risk, the KL-to-uniform term, the total annealed loss,
every evidence activation, the pignistic prior head, expected risk, the
riskEDL penalty and the policy log-probability used by REINFORCE.
"""

from typing import List

import numpy as np

from engine import ops
from engine.gradcheck import GradCheckCase
from engine.tensor import Tensor
from evidential.losses import (AnnealSchedule, EvidenceActivation, edl_total_loss, evidence,
                               kl_uniform, sse_terms)
from evidential.risk import (PignisticHead, PignisticPrediction, RiskMatrix, expected_risk,
                             pignistic_prior, policy, risk_edl_penalty)

_RISK = RiskMatrix(np.array([[0.0, 1.0, 4.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]]), name='gradcheck')


def _alpha_batch(rng):
    return [rng.uniform(1.0, 8.0, (4, 3))], {'labels': rng.integers(0, 3, 4)}


def _head_call(features, weight, bias):
    head = PignisticHead(np.zeros(weight.shape), np.zeros(bias.shape))
    head.weight, head.bias = weight, bias
    return pignistic_prior(features, head, weight.shape[0])


def _pignistic_inputs(rng):
    return ([rng.uniform(0.05, 5.0, (4, 3)), rng.uniform(-1.0, 1.0, (4, 3))],
            {'labels': rng.integers(0, 3, 4)})


def _prior_from_raw(raw: Tensor) -> Tensor:
    return 3.0 * ops.softmax(raw)


def _clamped_surrogate(arrays, extras):
    base = arrays[0]

    def evaluate(x):
        return np.exp(np.minimum(x, 10.0)) + (x - base)

    return evaluate


def _activation_case(kind: str) -> GradCheckCase:
    act = EvidenceActivation(kind)
    if kind == 'relu':
        def make(rng):
            x = rng.uniform(-3, 3, (3, 4))
            return [np.where(np.abs(x) < 0.05, 0.05 * np.sign(x + 1e-12), x)], {}
    elif kind == 'clamped-exp':
        def make(rng):
            x = rng.uniform(-3, 14, (3, 4))
            return [np.where(np.abs(x - 10.0) < 0.05, 10.05, x)], {}
    else:
        def make(rng):
            return [rng.uniform(-3, 3, (3, 4))], {}
    surrogate = _clamped_surrogate if kind == 'clamped-exp' else None
    return GradCheckCase(f'evidence[{kind}]', lambda x: evidence(x, act), make, surrogate)


def loss_cases() -> List[GradCheckCase]:
    """One case per loss head."""

    def policy_log_prob(c, raw, labels):
        pred = PignisticPrediction(c, _prior_from_raw(raw))
        return ops.log(ops.gather(policy(pred), labels))

    return [
        GradCheckCase('sse_bayes_risk', lambda a, labels: sum(sse_terms(a, labels)), _alpha_batch),
        GradCheckCase('kl_to_uniform', lambda a: kl_uniform(a),
                      lambda rng: ([rng.uniform(0.5, 20.0, (4, 3))], {})),
        GradCheckCase('edl_total_loss', lambda a, labels: edl_total_loss(a, labels, AnnealSchedule(10, 5)),
                      _alpha_batch),
        *[_activation_case(kind) for kind in ('relu', 'softplus', 'exp', 'clamped-exp')],
        GradCheckCase('pignistic_prior', _head_call,
                      lambda rng: ([rng.normal(size=(4, 5)), rng.normal(size=(3, 5)), rng.normal(size=(3,))], {})),
        GradCheckCase('expected_risk',
                      lambda c, raw, labels: expected_risk(PignisticPrediction(c, _prior_from_raw(raw)), labels, _RISK),
                      _pignistic_inputs),
        GradCheckCase('risk_edl_penalty',
                      lambda c, raw, labels: risk_edl_penalty(PignisticPrediction(c, _prior_from_raw(raw)), labels, _RISK),
                      _pignistic_inputs),
        GradCheckCase('policy_log_prob', policy_log_prob, _pignistic_inputs),
    ]
