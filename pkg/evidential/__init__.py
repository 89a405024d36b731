"""
Evidential Module

Dirichlet machinery, the evidential training objective, and the risk-aware
decision layer (pignistic priors, expected risk, policy gradient).
"""

from .dirichlet import (DirichletParams, SimplexPoint, mean, variance, predictive_entropy,
                        kl_to_uniform, remove_misleading, fuse, fuse_batch, sample, alpha_entropy,
                        entropy_of_probs)
from .losses import (EvidenceActivation, AnnealSchedule, anneal, evidence, sse_bayes_risk,
                     edl_total_loss, cross_entropy, cost_sensitive_cross_entropy)
from .risk import (RiskMatrix, PignisticHead, PignisticPrediction, pignistic_prior, expected_risk,
                   risk_edl_penalty, policy, decide, pg_epoch, CostOracle, BanditLog)

__all__ = [
    'DirichletParams',
    'SimplexPoint',
    'mean',
    'variance',
    'predictive_entropy',
    'kl_to_uniform',
    'remove_misleading',
    'fuse',
    'fuse_batch',
    'sample',
    'alpha_entropy',
    'entropy_of_probs',
    'EvidenceActivation',
    'AnnealSchedule',
    'anneal',
    'evidence',
    'sse_bayes_risk',
    'edl_total_loss',
    'cross_entropy',
    'cost_sensitive_cross_entropy',
    'RiskMatrix',
    'PignisticHead',
    'PignisticPrediction',
    'pignistic_prior',
    'expected_risk',
    'risk_edl_penalty',
    'policy',
    'decide',
    'pg_epoch',
    'CostOracle',
    'BanditLog',
]
