"""
Finite-Difference Gradient Checks

Compares analytic gradients from backward() against central finite
differences. Each check scalarizes the op output through a fixed random
projection, so one backward pass covers the full Jacobian-vector product.

Relative error is ||g_analytic - g_numeric|| / max(||g_analytic|| + ||g_numeric||, 1e-8).
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from engine import ops
from engine.tensor import Tensor, no_grad

logger = logging.getLogger(__name__)

InputFactory = Callable[[np.random.Generator], Tuple[List[np.ndarray], Dict[str, Any]]]


@dataclass
class GradCheckCase:
    """
    One operator (or loss head) under test.

    Args:
        name: Label shown in reports
        fn: Maps input Tensors (+ constant keyword extras) to an output Tensor
        make_inputs: Draws one random instance: float arrays plus constant extras
        surrogate: Optional factory that, given the base arrays, returns the
            function finite differences are taken of. Used where the forward
            value deliberately differs from what the backward pass differentiates
            (straight-through estimators).
    """
    name: str
    fn: Callable[..., Tensor]
    make_inputs: InputFactory
    surrogate: Optional[Callable[[List[np.ndarray], Dict[str, Any]], Callable[..., np.ndarray]]] = None


@dataclass
class GradCheckResult:
    name: str
    instances: int
    max_rel_error: float
    tolerance: float
    failures: int = 0
    errors: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failures == 0 and not self.errors


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    diff = np.linalg.norm(analytic - numeric)
    scale = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-8)
    return float(diff / scale)


def check_instance(case: GradCheckCase, rng: np.random.Generator, h: float = 1e-5) -> float:
    """Run one random instance of a case and return its worst relative error over inputs."""
    arrays, extras = case.make_inputs(rng)
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    out = case.fn(*tensors, **extras)
    projection = rng.standard_normal(out.shape)
    ops.sum(out * projection).backward()
    analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]

    if case.surrogate is not None:
        evaluate = case.surrogate([a.copy() for a in arrays], extras)
    else:
        def evaluate(*values):
            with no_grad():
                return case.fn(*[Tensor(v) for v in values], **extras).data

    worst = 0.0
    for index, base in enumerate(arrays):
        numeric = np.zeros_like(base)
        for flat in range(base.size):
            shifted = [a.copy() for a in arrays]
            shifted[index].flat[flat] = base.flat[flat] + h
            plus = float(np.sum(evaluate(*shifted) * projection))
            shifted[index].flat[flat] = base.flat[flat] - h
            minus = float(np.sum(evaluate(*shifted) * projection))
            numeric.flat[flat] = (plus - minus) / (2.0 * h)
        worst = max(worst, relative_error(analytic[index], numeric))
    return worst


def run_gradcheck(cases: Sequence[GradCheckCase], instances: int = 100, seed: int = 0,
                  tolerance: float = 1e-4) -> List[GradCheckResult]:
    """
    Check every case on `instances` random draws.

    Returns:
        List[GradCheckResult]: One result per case, in input order
    """
    results = []
    for position, case in enumerate(cases):
        rng = np.random.default_rng((seed, position))
        result = GradCheckResult(case.name, instances, 0.0, tolerance)
        for _ in range(instances):
            try:
                error = check_instance(case, rng)
            except Exception as exc:  # reported, not raised: the suite lists every case
                result.errors.append(f"{type(exc).__name__}: {exc}")
                break
            result.max_rel_error = max(result.max_rel_error, error)
            if not error < tolerance:
                result.failures += 1
        logger.info(f"gradcheck {case.name}: max rel err {result.max_rel_error:.3e} "
                    f"({'ok' if result.passed else 'FAIL'})")
        results.append(result)
    return results


# ---------------------------------------------------------------------- #
# Operator cases
# ---------------------------------------------------------------------- #
def _away_from(values: np.ndarray, point: float, margin: float = 0.05) -> np.ndarray:
    """Push values out of the kink region around point."""
    close = np.abs(values - point) < margin
    return np.where(close, point + np.sign(values - point + 1e-12) * margin, values)


def _distinct(rng: np.random.Generator, shape) -> np.ndarray:
    size = int(np.prod(shape))
    return (rng.permutation(size) * 0.1 + rng.uniform(0, 0.01, size)).reshape(shape)


def _simple(*shapes, low: float = -2.0, high: float = 2.0):
    def make(rng):
        return [rng.uniform(low, high, shape) for shape in shapes], {}
    return make


def operator_cases() -> List[GradCheckCase]:
    """One case per differentiable engine operator."""

    def div_inputs(rng):
        return [rng.uniform(-2, 2, (3, 4)), rng.uniform(0.5, 2.0, (4,))], {}

    def kinked(point, shape=(3, 4)):
        def make(rng):
            return [_away_from(rng.uniform(-2, 2, shape), point)], {}
        return make

    def gather_inputs(rng):
        return [rng.uniform(-2, 2, (5, 3))], {'labels': rng.integers(0, 3, 5)}

    def conv_inputs(rng):
        return [rng.uniform(-1, 1, (2, 2, 6, 6)), rng.uniform(-1, 1, (3, 2, 3, 3)), rng.uniform(-1, 1, (3,))], {}

    def pool_inputs(rng):
        return [_distinct(rng, (2, 2, 4, 6))], {}

    return [
        GradCheckCase('add', ops.add, _simple((3, 4), (4,))),
        GradCheckCase('sub', ops.sub, _simple((3, 4), (3, 1))),
        GradCheckCase('mul', ops.mul, _simple((2, 3), (3,))),
        GradCheckCase('div', ops.div, div_inputs),
        GradCheckCase('neg', ops.neg, _simple((3, 2))),
        GradCheckCase('square', ops.square, _simple((3, 4))),
        GradCheckCase('matmul', ops.matmul, _simple((3, 4), (4, 2))),
        GradCheckCase('relu', ops.relu, kinked(0.0)),
        GradCheckCase('softplus', ops.softplus, _simple((3, 4), low=-5, high=5)),
        GradCheckCase('exp', ops.exp, _simple((3, 4))),
        GradCheckCase('log', ops.log, _simple((3, 4), low=0.2, high=5.0)),
        GradCheckCase('minimum', lambda a: ops.minimum(a, 0.5), kinked(0.5)),
        GradCheckCase('lgamma', ops.lgamma, _simple((3, 4), low=0.3, high=20.0)),
        GradCheckCase('digamma', ops.digamma, _simple((3, 4), low=0.3, high=20.0)),
        GradCheckCase('sum', lambda a: ops.sum(a, axis=1), _simple((3, 4))),
        GradCheckCase('mean', lambda a: ops.mean(a, axis=0, keepdims=True), _simple((3, 4))),
        GradCheckCase('softmax', ops.softmax, _simple((3, 4), low=-4, high=4)),
        GradCheckCase('log_softmax', ops.log_softmax, _simple((3, 4), low=-4, high=4)),
        GradCheckCase('gather', ops.gather, gather_inputs),
        GradCheckCase('reshape', lambda a: ops.reshape(a, (2, 6)), _simple((3, 4))),
        GradCheckCase('transpose', lambda a: ops.transpose(a, (1, 0, 2)), _simple((2, 3, 2))),
        GradCheckCase('concat', lambda a, b: ops.concat([a, b], axis=1), _simple((2, 3), (2, 2))),
        GradCheckCase('conv2d_valid', lambda x, w, b: ops.conv2d(x, w, b, padding='valid'), conv_inputs),
        GradCheckCase('conv2d_same', lambda x, w, b: ops.conv2d(x, w, b, padding='same'), conv_inputs),
        GradCheckCase('max_pool2d', ops.max_pool2d, pool_inputs),
    ]
