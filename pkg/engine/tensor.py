"""
Tensor and Computation Tape

Dense float64 tensors with reverse-mode automatic differentiation.

Each operation that touches a tracked tensor records a node holding its
parents and a vector-Jacobian closure. backward() orders the recorded nodes
topologically and walks them in reverse, handing each closure the upstream
gradient and routing the returned parent gradients onward. Gradients reach
only leaves (tensors created with requires_grad=True) and accumulate there
until zero_grad() is called.
"""

import contextlib
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from utils.errors import NumericalError, ShapeError

# Signature of a backward closure: upstream gradient -> one gradient per parent
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable tape recording inside the block (inference on frozen models)."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    """
    A float64 array plus the bookkeeping needed for reverse-mode autodiff.

    Args:
        data: Anything numpy can turn into an array
        requires_grad: Mark the tensor as a leaf whose gradient is wanted
        name: Optional label used in diagnostics and checkpoints
    """

    __array_priority__ = 100.0  # make ndarray <op> Tensor dispatch to Tensor

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._parents: Tuple['Tensor', ...] = ()
        self._backward: Optional[BackwardFn] = None
        self._op = ''

    # ------------------------------------------------------------------ #
    # Construction helpers
    # ------------------------------------------------------------------ #
    @classmethod
    def from_op(cls, data: np.ndarray, parents: Sequence['Tensor'], backward: BackwardFn, op: str) -> 'Tensor':
        """Create the output of an operation, recording it when any parent is tracked."""
        out = cls.__new__(cls)
        out.data = np.asarray(data, dtype=np.float64)
        out.grad = None
        out.name = None
        tracked = _GRAD_ENABLED and any(p.requires_grad for p in parents)
        out.requires_grad = tracked
        out._parents = tuple(parents) if tracked else ()
        out._backward = backward if tracked else None
        out._op = op if tracked else ''
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> 'Tensor':
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    def __len__(self) -> int:
        return len(self.data)

    # ------------------------------------------------------------------ #
    # Operators (implemented in engine.ops)
    # ------------------------------------------------------------------ #
    def __add__(self, other):
        from engine import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from engine import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from engine import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from engine import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from engine import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from engine import ops
        return ops.mul(other, self)

    def __truediv__(self, other):
        from engine import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from engine import ops
        return ops.div(other, self)

    def __neg__(self):
        from engine import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from engine import ops
        return ops.matmul(self, other)

    def __rmatmul__(self, other):
        from engine import ops
        return ops.matmul(other, self)

    def sum(self, axis=None, keepdims: bool = False) -> 'Tensor':
        from engine import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> 'Tensor':
        from engine import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> 'Tensor':
        from engine import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    # ------------------------------------------------------------------ #
    # Reverse pass
    # ------------------------------------------------------------------ #
    def backward(self) -> None:
        """
        Accumulate d(self)/d(leaf) into every tracked leaf reachable from self.

        Raises:
            ShapeError: self is not a scalar
            NumericalError: a non-finite gradient was produced
        """
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar root, got shape {self.shape}")
        if not self.requires_grad:
            return

        tape = ComputationTape.from_root(self)
        grads = {id(self): np.ones_like(self.data)}
        for node in tape.reversed():
            upstream = grads.pop(id(node), None)
            if upstream is None:
                continue
            if node.is_leaf:
                if not np.all(np.isfinite(upstream)):
                    raise NumericalError(f"non-finite gradient reached leaf {node!r}")
                node.grad = upstream.copy() if node.grad is None else node.grad + upstream
                continue
            parent_grads = node._backward(upstream)
            for parent, grad in zip(node._parents, parent_grads):
                if grad is None or not parent.requires_grad:
                    continue
                if grad.shape != parent.shape:
                    raise ShapeError(
                        f"op '{node._op}' produced gradient of shape {grad.shape} "
                        f"for parent of shape {parent.shape}"
                    )
                key = id(parent)
                grads[key] = grads[key] + grad if key in grads else grad


class ComputationTape:
    """
    Ordered record of the operations that produced a root tensor.

    nodes lists every tracked tensor reachable from the root, parents before
    children, each exactly once.
    """

    def __init__(self, nodes: List[Tensor]):
        self.nodes = nodes

    @classmethod
    def from_root(cls, root: Tensor) -> 'ComputationTape':
        order: List[Tensor] = []
        visited = set()
        # iterative post-order DFS, parents before children
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return cls(order)

    def reversed(self) -> Iterator[Tensor]:
        return reversed(self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def ops(self) -> List[str]:
        return [node._op for node in self.nodes if not node.is_leaf]


def as_tensor(value) -> Tensor:
    """Wrap constants so operators accept plain numbers and arrays."""
    return value if isinstance(value, Tensor) else Tensor(value)
