"""
Backbones

Feature extractors g(x) feeding the logits layer f(x):

- mlp: dense layers of the given widths with relu (images are flattened)
- cnn: conv(20, 5x5)-pool-conv(50, 5x5)-pool-dense(500), every width scaled
  by a width factor

Parameters live in an ordered name -> Tensor dict. Backbone parameters are
prefixed 'backbone.', the final K-way layer is 'logits.weight' / 'logits.bias'.
"""

from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from engine import ops
from engine.tensor import Tensor, as_tensor
from utils.errors import ConfigError, ShapeError

BACKBONES = ('mlp', 'cnn')
KERNEL = 5


@dataclass(frozen=True)
class BackboneSpec:
    """
    Backbone architecture.

    Args:
        kind: 'mlp' or 'cnn'
        widths: Hidden layer widths of the mlp
        width_factor: Multiplier on the cnn's 20/50/500 widths
    """
    kind: str = 'mlp'
    widths: Tuple[int, ...] = (128,)
    width_factor: float = 1.0

    def __post_init__(self):
        if self.kind not in BACKBONES:
            raise ConfigError(f"unknown backbone '{self.kind}' (choose from {', '.join(BACKBONES)})")
        if self.kind == 'mlp' and not self.widths:
            raise ConfigError("mlp backbone needs at least one hidden width")
        if any(w < 1 for w in self.widths):
            raise ConfigError(f"mlp widths must be positive, got {self.widths}")
        if self.width_factor <= 0:
            raise ConfigError(f"cnn width factor must be positive, got {self.width_factor}")

    @classmethod
    def parse(cls, text: str) -> 'BackboneSpec':
        """
        Parse 'mlp:128', 'mlp:256,128' or 'cnn:w=0.5'.

        Example:
            >>> BackboneSpec.parse('cnn:w=1.0').conv_widths
            (20, 50, 500)
        """
        kind, _, rest = text.strip().partition(':')
        rest = rest.strip()
        try:
            if kind == 'mlp':
                widths = tuple(int(w) for w in rest.split(',') if w.strip()) if rest else (128,)
                return cls('mlp', widths=widths)
            if kind == 'cnn':
                factor = float(rest.partition('=')[2]) if rest else 1.0
                return cls('cnn', widths=(), width_factor=factor)
        except ValueError:
            raise ConfigError(f"cannot parse backbone '{text}'") from None
        raise ConfigError(f"unknown backbone '{text}' (use mlp:<widths> or cnn:w=<factor>)")

    def describe(self) -> str:
        """Inverse of parse(); stored in checkpoints."""
        if self.kind == 'mlp':
            return 'mlp:' + ','.join(str(w) for w in self.widths)
        return f'cnn:w={self.width_factor!r}'

    @property
    def conv_widths(self) -> Tuple[int, int, int]:
        return tuple(max(1, int(round(base * self.width_factor))) for base in (20, 50, 500))


def _dense(rng: np.random.Generator, fan_in: int, fan_out: int, prefix: str) -> Dict[str, Tensor]:
    weight = rng.normal(0.0, np.sqrt(2.0 / fan_in), (fan_in, fan_out))
    return {f'{prefix}.weight': Tensor(weight, requires_grad=True, name=f'{prefix}.weight'),
            f'{prefix}.bias': Tensor(np.zeros(fan_out), requires_grad=True, name=f'{prefix}.bias')}


def _conv(rng: np.random.Generator, channels: int, filters: int, prefix: str) -> Dict[str, Tensor]:
    fan_in = channels * KERNEL * KERNEL
    weight = rng.normal(0.0, np.sqrt(2.0 / fan_in), (filters, channels, KERNEL, KERNEL))
    return {f'{prefix}.weight': Tensor(weight, requires_grad=True, name=f'{prefix}.weight'),
            f'{prefix}.bias': Tensor(np.zeros(filters), requires_grad=True, name=f'{prefix}.bias')}


def _cnn_flat_size(input_shape: Tuple[int, ...], conv2: int) -> int:
    if len(input_shape) != 3:
        raise ShapeError(f"cnn backbone needs (H, W, C) images, got input shape {input_shape}")
    h, w = input_shape[:2]
    for _ in range(2):
        h, w = (h - KERNEL + 1) // 2, (w - KERNEL + 1) // 2
    if h < 1 or w < 1:
        raise ShapeError(f"cnn backbone: input {input_shape} too small for two 5x5 conv + pool stages")
    return conv2 * h * w


def init_parameters(spec: BackboneSpec, input_shape: Tuple[int, ...], num_classes: int,
                    seed: int) -> 'OrderedDict[str, Tensor]':
    """
    He-initialized backbone and logits parameters, deterministic in seed.

    Returns:
        OrderedDict: name -> Tensor (requires_grad=True), backbone first, logits last
    """
    rng = np.random.default_rng((seed, 0))
    params: 'OrderedDict[str, Tensor]' = OrderedDict()
    if spec.kind == 'mlp':
        width = int(np.prod(input_shape))
        for index, hidden in enumerate(spec.widths):
            params.update(_dense(rng, width, hidden, f'backbone.dense{index}'))
            width = hidden
    else:
        conv1, conv2, hidden = spec.conv_widths
        params.update(_conv(rng, input_shape[2] if len(input_shape) == 3 else 1, conv1, 'backbone.conv0'))
        params.update(_conv(rng, conv1, conv2, 'backbone.conv1'))
        params.update(_dense(rng, _cnn_flat_size(tuple(input_shape), conv2), hidden, 'backbone.dense0'))
        width = hidden
    params.update(_dense(rng, width, num_classes, 'logits'))
    return params


def feature_dim(params: Dict[str, Tensor]) -> int:
    return params['logits.weight'].shape[0]


def features(spec: BackboneSpec, params: Dict[str, Tensor], x) -> Tensor:
    """Penultimate activations g(x), shape (N, D)."""
    x = as_tensor(x)
    n = x.shape[0]
    if spec.kind == 'mlp':
        h = ops.reshape(x, (n, -1))
        for index in range(len(spec.widths)):
            prefix = f'backbone.dense{index}'
            h = ops.relu(ops.matmul(h, params[f'{prefix}.weight']) + params[f'{prefix}.bias'])
        return h
    if x.ndim != 4:
        raise ShapeError(f"cnn backbone expects (N, H, W, C) input, got {x.shape}")
    h = ops.transpose(x, (0, 3, 1, 2))
    for prefix in ('backbone.conv0', 'backbone.conv1'):
        h = ops.max_pool2d(ops.relu(ops.conv2d(h, params[f'{prefix}.weight'], params[f'{prefix}.bias'])))
    h = ops.reshape(h, (n, -1))
    return ops.relu(ops.matmul(h, params['backbone.dense0.weight']) + params['backbone.dense0.bias'])


def logits(params: Dict[str, Tensor], feats: Tensor) -> Tensor:
    """f(x) = g(x) W + b, shape (N, K)."""
    return ops.matmul(feats, params['logits.weight']) + params['logits.bias']
