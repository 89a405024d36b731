"""
Models Module

Backbones, the evidence model and its training regimes, and the checkpoint
file format.
"""

from .backbones import BackboneSpec
from .evidence_model import EvidenceModel, EVIDENTIAL_MODES, SOFTMAX_MODES, MODES
from .training import (
    EpochRecord,
    pretrain_softmax,
    train_cost_sensitive,
    train_edl,
    finetune_edl,
    train_risk,
    RISK_MODES,
)
from .checkpoint import save, load, read_header, MAGIC, FORMAT_VERSION

__all__ = [
    'BackboneSpec',
    'EvidenceModel',
    'EVIDENTIAL_MODES',
    'SOFTMAX_MODES',
    'MODES',
    'EpochRecord',
    'pretrain_softmax',
    'train_cost_sensitive',
    'train_edl',
    'finetune_edl',
    'train_risk',
    'RISK_MODES',
    'save',
    'load',
    'read_header',
    'MAGIC',
    'FORMAT_VERSION',
]
