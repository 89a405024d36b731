"""
Differentiable Operators

Every function takes Tensors (or constants), computes the forward value with
numpy and records a vector-Jacobian closure on the output. Elementwise
binary operators broadcast with numpy rules; the backward pass sums
gradients back over broadcast axes.

Operator set:
- arithmetic: add, sub, mul, div, neg, square, matmul
- elementwise: relu, softplus, exp, log, minimum (with a constant), lgamma, digamma
- reductions: sum, mean, softmax / log_softmax over the last axis
- indexing and layout: gather, reshape, transpose, concat, stop_gradient
- convolutional: conv2d (stride 1, valid/same), max_pool2d (2x2)
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from engine.tensor import Tensor, as_tensor
from utils.errors import NumericalError, ShapeError

Axis = Optional[Union[int, Tuple[int, ...]]]


def _finite(data: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(data)):
        raise NumericalError(f"op '{op}' produced non-finite values")
    return data


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum grad down to shape, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_check(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------------- #
# Arithmetic
# ---------------------------------------------------------------------- #
def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, 'add')

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor.from_op(_finite(a.data + b.data, 'add'), (a, b), backward, 'add')


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, 'sub')

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor.from_op(_finite(a.data - b.data, 'sub'), (a, b), backward, 'sub')


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, 'mul')

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor.from_op(_finite(a.data * b.data, 'mul'), (a, b), backward, 'mul')


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, 'div')
    with np.errstate(divide='ignore', invalid='ignore'):
        out = _finite(a.data / b.data, 'div')

    def backward(g):
        return (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data ** 2), b.shape),
        )

    return Tensor.from_op(out, (a, b), backward, 'div')


def neg(a) -> Tensor:
    a = as_tensor(a)
    return Tensor.from_op(-a.data, (a,), lambda g: (-g,), 'neg')


def square(a) -> Tensor:
    a = as_tensor(a)
    return Tensor.from_op(_finite(a.data ** 2, 'square'), (a,), lambda g: (2.0 * a.data * g,), 'square')


def matmul(a, b) -> Tensor:
    """Matrix product of two 2-D tensors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return Tensor.from_op(_finite(a.data @ b.data, 'matmul'), (a, b), backward, 'matmul')


# ---------------------------------------------------------------------- #
# Elementwise
# ---------------------------------------------------------------------- #
def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return Tensor.from_op(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), 'relu')


def softplus(a) -> Tensor:
    a = as_tensor(a)
    out = np.logaddexp(0.0, a.data)
    return Tensor.from_op(_finite(out, 'softplus'), (a,), lambda g: (g * special.expit(a.data),), 'softplus')


def exp(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over='ignore'):
        out = _finite(np.exp(a.data), 'exp')
    return Tensor.from_op(out, (a,), lambda g: (g * out,), 'exp')


def log(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise NumericalError("op 'log' received non-positive values")
    return Tensor.from_op(np.log(a.data), (a,), lambda g: (g / a.data,), 'log')


def minimum(a, value: float) -> Tensor:
    """Elementwise min(a, value) against a constant; gradient flows where a < value."""
    a = as_tensor(a)
    mask = a.data < value
    return Tensor.from_op(np.minimum(a.data, value), (a,), lambda g: (g * mask,), 'minimum')


def lgamma(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise NumericalError("op 'lgamma' is only defined here for positive arguments")
    return Tensor.from_op(special.gammaln(a.data), (a,), lambda g: (g * special.digamma(a.data),), 'lgamma')


def digamma(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise NumericalError("op 'digamma' is only defined here for positive arguments")
    return Tensor.from_op(
        special.digamma(a.data), (a,), lambda g: (g * special.polygamma(1, a.data),), 'digamma'
    )


def stop_gradient(a) -> Tensor:
    """Identity in the forward pass, blocks the gradient (bg in the clamped activation)."""
    a = as_tensor(a)
    return Tensor(a.data.copy())


# ---------------------------------------------------------------------- #
# Reductions
# ---------------------------------------------------------------------- #
def _expand(g: np.ndarray, shape: Tuple[int, ...], axis: Axis, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        axes = (axis,) if isinstance(axis, int) else axis
        axes = tuple(ax % len(shape) for ax in axes)
        for ax in sorted(axes):
            g = np.expand_dims(g, ax)
    return np.broadcast_to(g, shape).copy()


def sum(a, axis: Axis = None, keepdims: bool = False) -> Tensor:  # noqa: A001 - mirrors numpy
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)
    return Tensor.from_op(out, (a,), lambda g: (_expand(g, a.shape, axis, keepdims),), 'sum')


def mean(a, axis: Axis = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size / max(out.size, 1)
    return Tensor.from_op(out, (a,), lambda g: (_expand(g, a.shape, axis, keepdims) / count,), 'mean')


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = np.exp(x - x.max(axis=-1, keepdims=True))
    return shifted / shifted.sum(axis=-1, keepdims=True)


def softmax(a) -> Tensor:
    """Softmax over the last axis (max-subtracted)."""
    a = as_tensor(a)
    out = _softmax(a.data)

    def backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return Tensor.from_op(out, (a,), backward, 'softmax')


def log_softmax(a) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))

    def backward(g):
        return (g - np.exp(out) * g.sum(axis=-1, keepdims=True),)

    return Tensor.from_op(out, (a,), backward, 'log_softmax')


# ---------------------------------------------------------------------- #
# Indexing and layout
# ---------------------------------------------------------------------- #
def gather(a, labels) -> Tensor:
    """Pick a[i, labels[i]] for every row i of a 2-D tensor."""
    a = as_tensor(a)
    labels = np.asarray(labels, dtype=np.int64)
    if a.ndim != 2 or labels.shape != (a.shape[0],):
        raise ShapeError(f"gather: expected (N, K) values and (N,) labels, got {a.shape} and {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= a.shape[1]):
        raise ShapeError(f"gather: label out of range for shape {a.shape}")
    rows = np.arange(a.shape[0])

    def backward(g):
        grad = np.zeros_like(a.data)
        grad[rows, labels] = g
        return (grad,)

    return Tensor.from_op(a.data[rows, labels], (a,), backward, 'gather')


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view shape {a.shape} as {tuple(shape)}") from None
    return Tensor.from_op(out, (a,), lambda g: (g.reshape(a.shape),), 'reshape')


def transpose(a, axes: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    inverse = np.argsort(axes)
    return Tensor.from_op(a.data.transpose(axes), (a,), lambda g: (g.transpose(inverse),), 'transpose')


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = ' and '.join(str(t.shape) for t in tensors)
        raise ShapeError(f"concat: incompatible shapes {shapes}") from None
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor.from_op(out, tensors, backward, 'concat')


# ---------------------------------------------------------------------- #
# Convolutional layers (NCHW)
# ---------------------------------------------------------------------- #
def conv2d(x, weight, bias=None, padding: str = 'valid') -> Tensor:
    """
    Stride-1 2-D cross-correlation.

    Args:
        x: Input of shape (N, C, H, W)
        weight: Filters of shape (F, C, kh, kw)
        bias: Optional per-filter bias of shape (F,)
        padding: 'valid' or 'same' (odd kernels)

    Returns:
        Tensor: Output of shape (N, F, H', W')
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"conv2d: incompatible input {x.shape} and weight {weight.shape}")
    kh, kw = weight.shape[2:]
    if padding == 'same':
        ph, pw = (kh - 1) // 2, (kw - 1) // 2
    elif padding == 'valid':
        ph = pw = 0
    else:
        raise ShapeError(f"conv2d: unknown padding '{padding}'")
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, kh - 1 - ph), (pw, kw - 1 - pw))) if padding == 'same' else x.data
    if xp.shape[2] < kh or xp.shape[3] < kw:
        raise ShapeError(f"conv2d: input {x.shape} smaller than kernel {weight.shape}")
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))  # (N, C, Ho, Wo, kh, kw)
    out = np.einsum('nchwij,fcij->nfhw', windows, weight.data, optimize=True)
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[0],):
            raise ShapeError(f"conv2d: bias shape {bias.shape} does not match {weight.shape[0]} filters")
        out = out + bias.data[None, :, None, None]
        parents.append(bias)
    ho, wo = out.shape[2:]

    def backward(g):
        grad_w = np.einsum('nchwij,nfhw->fcij', windows, g, optimize=True)
        grad_xp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                grad_xp[:, :, i:i + ho, j:j + wo] += np.einsum('nfhw,fc->nchw', g, weight.data[:, :, i, j])
        grad_x = grad_xp[:, :, ph:ph + x.shape[2], pw:pw + x.shape[3]]
        grads = [grad_x, grad_w]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    return Tensor.from_op(_finite(out, 'conv2d'), parents, backward, 'conv2d')


def max_pool2d(x) -> Tensor:
    """2x2 max pooling with stride 2 over (N, C, H, W); odd trailing rows/columns are dropped."""
    x = as_tensor(x)
    if x.ndim != 4:
        raise ShapeError(f"max_pool2d: expected (N, C, H, W), got {x.shape}")
    n, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    cropped = x.data[:, :, :h2 * 2, :w2 * 2]
    blocks = cropped.reshape(n, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h2, w2, 4)
    winner = blocks.argmax(axis=-1)[..., None]
    out = np.take_along_axis(blocks, winner, axis=-1)[..., 0]

    def backward(g):
        grad_blocks = np.zeros_like(blocks)
        np.put_along_axis(grad_blocks, winner, g[..., None], axis=-1)
        grad = grad_blocks.reshape(n, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h2 * 2, w2 * 2)
        full = np.zeros_like(x.data)
        full[:, :, :h2 * 2, :w2 * 2] = grad
        return (full,)

    return Tensor.from_op(out, (x,), backward, 'max_pool2d')


def one_hot(labels, num_classes: int) -> np.ndarray:
    """Constant (N, K) indicator matrix; used as a non-tracked operand."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ShapeError(f"one_hot: labels outside [0, {num_classes})")
    out = np.zeros((labels.shape[0], num_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out
