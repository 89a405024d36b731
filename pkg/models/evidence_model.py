"""
Evidence Model

A backbone, a K-way logits layer and an optional pignistic head, together
with the bookkeeping the training regimes need:

- mode tag (softmax, cs-softmax, edl, risk-edl, edl-p, edl-pg)
- evidence activation for the evidential modes
- parameter groups ('backbone', 'logits', 'head') and a freeze mask per group
- the original label ids of the K outputs (used to check fusion disjointness)
"""

import copy
import hashlib
import logging
from collections import OrderedDict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from engine import ops
from engine.tensor import Tensor, no_grad
from evidential.dirichlet import entropy_of_probs
from evidential.losses import EvidenceActivation
from evidential.risk import PignisticHead, PignisticPrediction, decide, pignistic_prior, policy
from models import backbones
from models.backbones import BackboneSpec
from utils.errors import ContractError, ShapeError

logger = logging.getLogger(__name__)

SOFTMAX_MODES = ('softmax', 'cs-softmax')
EVIDENTIAL_MODES = ('edl', 'risk-edl', 'edl-p', 'edl-pg')
MODES = SOFTMAX_MODES + EVIDENTIAL_MODES
GROUPS = ('backbone', 'logits', 'head')
INFERENCE_BATCH = 512


class EvidenceModel:
    """
    Network exposing penultimate features g(x), logits f(x) and evidence.

    Args:
        spec: Backbone architecture
        params: Ordered backbone + logits parameters
        input_shape: Shape of one sample
        num_classes: K
        mode: Training regime that produced the model
        activation: Evidence activation kind (None for softmax models)
        labels: Original class ids of the K outputs
    """

    def __init__(self, spec: BackboneSpec, params: 'OrderedDict[str, Tensor]', input_shape: Sequence[int],
                 num_classes: int, mode: str = 'edl', activation: Optional[str] = 'softplus',
                 labels: Optional[Sequence[int]] = None):
        if mode not in MODES:
            raise ContractError(f"unknown model mode '{mode}' (choose from {', '.join(MODES)})")
        if params['logits.weight'].shape[1] != num_classes:
            raise ShapeError(f"logits layer has {params['logits.weight'].shape[1]} outputs, expected K={num_classes}")
        self.spec = spec
        self.params = params
        self.input_shape = tuple(int(d) for d in input_shape)
        self.num_classes = int(num_classes)
        self.mode = mode
        self.activation = activation
        self.labels: Tuple[int, ...] = tuple(int(c) for c in labels) if labels is not None \
            else tuple(range(num_classes))
        self.head: Optional[PignisticHead] = None
        self.history: List = []
        self.metadata: Dict = {}
        self._frozen = set()

    @classmethod
    def create(cls, spec: BackboneSpec, input_shape: Sequence[int], num_classes: int, mode: str = 'edl',
               activation: Optional[str] = 'softplus', seed: int = 0,
               labels: Optional[Sequence[int]] = None) -> 'EvidenceModel':
        """Freshly initialized model, deterministic in seed."""
        params = backbones.init_parameters(spec, tuple(input_shape), num_classes, seed)
        return cls(spec, params, input_shape, num_classes, mode, activation, labels)

    def clone(self) -> 'EvidenceModel':
        """Deep copy; training phases work on a clone so the input model stays untouched."""
        return copy.deepcopy(self)

    # ------------------------------------------------------------------ #
    # Parameters
    # ------------------------------------------------------------------ #
    @property
    def feature_dim(self) -> int:
        return backbones.feature_dim(self.params)

    @property
    def is_evidential(self) -> bool:
        return self.mode in EVIDENTIAL_MODES

    def named_parameters(self) -> List[Tuple[str, Tensor]]:
        named = list(self.params.items())
        if self.head is not None:
            named += [('head.weight', self.head.weight), ('head.bias', self.head.bias)]
        return named

    def group_parameters(self, group: str) -> List[Tensor]:
        if group not in GROUPS:
            raise ContractError(f"unknown parameter group '{group}'")
        return [tensor for name, tensor in self.named_parameters() if name.split('.')[0] == group]

    def trainable_parameters(self) -> List[Tensor]:
        return [tensor for name, tensor in self.named_parameters() if name.split('.')[0] not in self._frozen]

    def freeze(self, *groups: str) -> None:
        for group in groups:
            for tensor in self.group_parameters(group):
                tensor.requires_grad = False
                tensor.grad = None
            self._frozen.add(group)

    def unfreeze(self, *groups: str) -> None:
        for group in groups:
            for tensor in self.group_parameters(group):
                tensor.requires_grad = True
            self._frozen.discard(group)

    def is_frozen(self, group: str) -> bool:
        return group in self._frozen

    @property
    def frozen_groups(self) -> Tuple[str, ...]:
        return tuple(group for group in GROUPS if group in self._frozen)

    def digest(self, exclude: Sequence[str] = ('head',)) -> str:
        """SHA-256 over names, shapes and raw bytes of every parameter outside `exclude`."""
        sha = hashlib.sha256()
        for name, tensor in self.named_parameters():
            if name.split('.')[0] in exclude:
                continue
            sha.update(name.encode())
            sha.update(repr(tensor.shape).encode())
            sha.update(np.ascontiguousarray(tensor.data, dtype='<f8').tobytes())
        return sha.hexdigest()

    def attach_head(self, method: str = 'zero', seed: int = 0, sigma: float = 0.01) -> PignisticHead:
        self.head = PignisticHead.initialize(self.num_classes, self.feature_dim, method, seed, sigma)
        logger.debug(f"Attached {method} pignistic head {self.head.weight.shape}")
        return self.head

    # ------------------------------------------------------------------ #
    # Forward
    # ------------------------------------------------------------------ #
    def _check_input(self, x) -> None:
        shape = tuple(np.shape(x.data if isinstance(x, Tensor) else x))[1:]
        if shape != self.input_shape:
            raise ShapeError(f"model expects samples of shape {self.input_shape}, got {shape}")

    def forward(self, x) -> Tuple[Tensor, Tensor]:
        """(g(x), f(x)) for a batch."""
        self._check_input(x)
        feats = backbones.features(self.spec, self.params, x)
        return feats, backbones.logits(self.params, feats)

    __call__ = forward

    def evidence_from_logits(self, logits: Tensor) -> Tensor:
        if self.activation is None:
            raise ContractError(f"{self.mode} model has no evidence activation")
        return EvidenceActivation(self.activation)(logits)

    def evidence(self, x) -> Tensor:
        return self.evidence_from_logits(self.forward(x)[1])

    def _batched(self, samples: np.ndarray, fn) -> List:
        outputs = []
        with no_grad():
            for start in range(0, samples.shape[0], INFERENCE_BATCH):
                outputs.append(fn(samples[start:start + INFERENCE_BATCH]))
        return outputs

    def infer_features(self, samples: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Penultimate features and evidence as arrays, without recording a tape."""
        def step(batch):
            feats, logit_values = self.forward(batch)
            return feats.data, self.evidence_from_logits(logit_values).data
        parts = self._batched(np.asarray(samples, dtype=np.float64), step)
        return (np.concatenate([p[0] for p in parts]) if parts else np.zeros((0, self.feature_dim)),
                np.concatenate([p[1] for p in parts]) if parts else np.zeros((0, self.num_classes)))

    def logits(self, samples: np.ndarray) -> np.ndarray:
        parts = self._batched(np.asarray(samples, dtype=np.float64), lambda batch: self.forward(batch)[1].data)
        return np.concatenate(parts) if parts else np.zeros((0, self.num_classes))

    def prediction(self, samples: np.ndarray) -> PignisticPrediction:
        """Evidence and prior (the head's gamma, or all ones) for an evidential model."""
        if not self.is_evidential:
            raise ContractError(f"{self.mode} model produces no evidence")
        feats, evidence_values = self.infer_features(samples)
        if self.head is None:
            return PignisticPrediction.uniform(evidence_values)
        with no_grad():
            prior = pignistic_prior(feats, self.head, self.num_classes)
        return PignisticPrediction(Tensor(evidence_values), prior)

    def alpha(self, samples: np.ndarray) -> np.ndarray:
        return self.prediction(samples).alpha.data

    def predictive(self, samples: np.ndarray) -> np.ndarray:
        """
        Predictive class probabilities (N, K).

        softmax for softmax models, alpha / S for evidential models (with the
        head's gamma in place of the ones when a head is attached).
        """
        if not self.is_evidential:
            with no_grad():
                return ops.softmax(Tensor(self.logits(samples))).data
        with no_grad():
            return policy(self.prediction(samples)).data

    def predict(self, samples: np.ndarray) -> np.ndarray:
        """Hard decisions: argmax of the predictive, decide() for pignistic models."""
        if self.is_evidential and self.head is not None:
            return decide(self.prediction(samples))
        return np.argmax(self.predictive(samples), axis=1)

    def entropy(self, samples: np.ndarray) -> np.ndarray:
        """Entropy of the predictive distribution per sample."""
        return entropy_of_probs(self.predictive(samples))

    def state(self) -> Dict[str, np.ndarray]:
        return OrderedDict((name, tensor.data.copy()) for name, tensor in self.named_parameters())

    def __repr__(self) -> str:
        return (f"EvidenceModel({self.spec.describe()}, K={self.num_classes}, mode={self.mode}, "
                f"activation={self.activation}, head={'yes' if self.head is not None else 'no'})")
