"""
Autodiff Engine

Dense float64 tensors with reverse-mode differentiation, the operator set
used by every model and loss in the toolkit, Adam, and the
finite-difference gradient checker.
"""

from . import ops
from .tensor import Tensor, ComputationTape, no_grad, is_grad_enabled
from .optim import Adam, AdamState, adam_step, sgd_step
from .gradcheck import GradCheckCase, GradCheckResult, run_gradcheck, operator_cases

__all__ = [
    'ops',
    'Tensor',
    'ComputationTape',
    'no_grad',
    'is_grad_enabled',
    'Adam',
    'AdamState',
    'adam_step',
    'sgd_step',
    'GradCheckCase',
    'GradCheckResult',
    'run_gradcheck',
    'operator_cases',
]
