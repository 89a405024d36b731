"""
Optimizers

Adam with bias correction (the optimizer every training regime uses) and
the plain gradient step used by the policy-gradient head trainer.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from engine.tensor import Tensor
from utils.errors import ContractError, NumericalError

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """
    Moment accumulators for a list of parameters.

    m[i] / v[i] match the shape of the i-th parameter; step counts completed updates.
    """
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[int, np.ndarray] = field(default_factory=dict)
    v: Dict[int, np.ndarray] = field(default_factory=dict)


def adam_step(params: Sequence[Tensor], state: AdamState) -> None:
    """
    Apply one Adam update in place and clear the gradients.

    Args:
        params: Parameters with populated .grad
        state: Accumulators, updated in place

    Raises:
        ContractError: a parameter has no gradient
        NumericalError: the update produced non-finite values
    """
    missing = [p.name or repr(p) for p in params if p.grad is None]
    if missing:
        raise ContractError(f"adam_step: missing gradient for {', '.join(missing)}")

    state.step += 1
    bias1 = 1.0 - state.beta1 ** state.step
    bias2 = 1.0 - state.beta2 ** state.step
    for index, param in enumerate(params):
        grad = param.grad
        m = state.m.get(index)
        v = state.v.get(index)
        if m is None or m.shape != param.shape:
            m = np.zeros_like(param.data)
            v = np.zeros_like(param.data)
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        state.m[index], state.v[index] = m, v
        update = state.lr * (m / bias1) / (np.sqrt(v / bias2) + state.eps)
        param.data = param.data - update
        if not np.all(np.isfinite(param.data)):
            raise NumericalError(f"adam_step: non-finite parameter {param.name or index} at step {state.step}")
        param.grad = None


class Adam:
    """
    Adam over a fixed parameter list.

    Example:
        >>> optimizer = Adam(model.trainable_parameters(), lr=1e-3)
        >>> loss.backward()
        >>> optimizer.step()
    """

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params: List[Tensor] = list(params)
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    def step(self) -> None:
        adam_step(self.params, self.state)

    def zero_grad(self) -> None:
        for param in self.params:
            param.grad = None


def sgd_step(params: Sequence[Tensor], lr: float) -> None:
    """Plain gradient step Θ <- Θ - lr * grad; parameters without a gradient are left alone."""
    for param in params:
        if param.grad is None:
            continue
        param.data = param.data - lr * param.grad
        param.grad = None
