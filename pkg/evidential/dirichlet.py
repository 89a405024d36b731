"""
Dirichlet Machinery

Closed-form helpers over concentration vectors:
- moments (mean, variance) and the entropy of the predictive categorical
- KL divergence to the uniform Dirichlet Dir(1, ..., 1)
- removal of the correct-class evidence before the KL penalty
- fusion of classifiers over disjoint label sets by concatenation
- seeded sampling through normalized gamma variates

Array-level functions accept (K,) or (N, K) concentrations and work along the
last axis. lgamma/digamma come from scipy.special; numpy's gamma sampler
implements Marsaglia-Tsang (with the boost for shape < 1).
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special

from utils.errors import DirichletError

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class DirichletParams:
    """
    Concentration vector alpha over K >= 2 categories.

    labels optionally names the category each component refers to; fuse()
    uses it to enforce disjoint label sets.
    """
    alpha: np.ndarray
    labels: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=np.float64).reshape(-1)
        if alpha.size < 2:
            raise DirichletError(f"a Dirichlet needs at least 2 categories, got {alpha.size}")
        if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0):
            raise DirichletError(f"concentrations must be finite and positive, got {alpha}")
        object.__setattr__(self, 'alpha', alpha)
        if self.labels is not None:
            labels = tuple(int(label) for label in self.labels)
            if len(labels) != alpha.size:
                raise DirichletError(f"{len(labels)} labels for {alpha.size} concentrations")
            object.__setattr__(self, 'labels', labels)

    @property
    def K(self) -> int:
        return self.alpha.size

    @property
    def total(self) -> float:
        """alpha_0, the total concentration."""
        return float(self.alpha.sum())


@dataclass(frozen=True)
class SimplexPoint:
    """A probability vector: entries in [0, 1] summing to 1."""
    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=np.float64).reshape(-1)
        if np.any(p < -SIMPLEX_TOL) or np.any(p > 1 + SIMPLEX_TOL) or abs(p.sum() - 1.0) > SIMPLEX_TOL:
            raise DirichletError(f"not a point of the simplex: {p}")
        object.__setattr__(self, 'p', p)


def _params(d: Union[DirichletParams, Sequence[float], np.ndarray]) -> DirichletParams:
    return d if isinstance(d, DirichletParams) else DirichletParams(np.asarray(d, dtype=np.float64))


# ---------------------------------------------------------------------- #
# Moments and entropy
# ---------------------------------------------------------------------- #
def mean(d) -> SimplexPoint:
    """alpha_k / alpha_0; also the marginal p(y=k | alpha)."""
    d = _params(d)
    return SimplexPoint(d.alpha / d.total)


def variance(d, k: int) -> float:
    d = _params(d)
    if not 0 <= k < d.K:
        raise DirichletError(f"category index {k} out of range for K={d.K}")
    a0, ak = d.total, d.alpha[k]
    return float(ak * (a0 - ak) / (a0 ** 2 * (a0 + 1.0)))


def predictive_entropy(d) -> float:
    """Entropy (nats) of the categorical given by the Dirichlet mean; in [0, ln K]."""
    return float(entropy_of_probs(mean(d).p))


def entropy_of_probs(probs: np.ndarray) -> np.ndarray:
    """Row-wise entropy (nats) of probability vectors, 0 ln 0 = 0."""
    probs = np.asarray(probs, dtype=np.float64)
    return -np.sum(special.xlogy(probs, probs), axis=-1)


def alpha_entropy(alpha: np.ndarray) -> np.ndarray:
    """Predictive entropy for a batch of concentrations (N, K)."""
    alpha = np.asarray(alpha, dtype=np.float64)
    return entropy_of_probs(alpha / alpha.sum(axis=-1, keepdims=True))


# ---------------------------------------------------------------------- #
# KL to uniform and misleading-evidence removal
# ---------------------------------------------------------------------- #
def kl_to_uniform(d_tilde) -> float:
    """KL(Dir(alpha~) || Dir(1, ..., 1)); zero exactly when alpha~ is the ones vector."""
    if not isinstance(d_tilde, DirichletParams):
        values = np.asarray(d_tilde, dtype=np.float64)
        if np.any(values <= 0):
            raise DirichletError(f"kl_to_uniform needs positive concentrations, got {values}")
    return float(kl_to_uniform_batch(_params(d_tilde).alpha))


def kl_to_uniform_batch(alpha_tilde: np.ndarray) -> np.ndarray:
    alpha_tilde = np.asarray(alpha_tilde, dtype=np.float64)
    if np.any(alpha_tilde <= 0):
        raise DirichletError("kl_to_uniform needs positive concentrations")
    k = alpha_tilde.shape[-1]
    total = alpha_tilde.sum(axis=-1)
    return (
        special.gammaln(total)
        - special.gammaln(k)
        - special.gammaln(alpha_tilde).sum(axis=-1)
        + ((alpha_tilde - 1.0) * (special.digamma(alpha_tilde) - special.digamma(total)[..., None])).sum(axis=-1)
    )


def remove_misleading(alpha, y: int) -> DirichletParams:
    """alpha~ = y_onehot + (1 - y_onehot) * alpha: the true class drops to 1, others keep their evidence."""
    d = _params(alpha)
    if not 0 <= y < d.K:
        raise DirichletError(f"class index {y} out of range for K={d.K}")
    tilde = d.alpha.copy()
    tilde[y] = 1.0
    return DirichletParams(tilde, d.labels)


# ---------------------------------------------------------------------- #
# Fusion
# ---------------------------------------------------------------------- #
def fuse(a, b) -> DirichletParams:
    """
    Merge two classifiers' Dirichlets over disjoint label sets by concatenating concentrations.

    Unlabelled parameters are taken to sit on consecutive, disjoint label ranges.

    Raises:
        DirichletError: either side is empty or the label sets overlap
    """
    for side, value in (('first', a), ('second', b)):
        if not isinstance(value, DirichletParams) and np.asarray(value).size == 0:
            raise DirichletError(f"fuse: the {side} Dirichlet has no categories")
    a, b = _params(a), _params(b)
    if a is b:
        raise DirichletError("fuse: cannot fuse a classifier with itself")
    labels_a = a.labels if a.labels is not None else tuple(range(a.K))
    if b.labels is not None:
        labels_b = b.labels
    else:
        offset = max(labels_a) + 1
        labels_b = tuple(range(offset, offset + b.K))
    overlap = set(labels_a) & set(labels_b)
    if overlap:
        raise DirichletError(f"fuse: label sets overlap on {sorted(overlap)}")
    return DirichletParams(np.concatenate([a.alpha, b.alpha]), labels_a + labels_b)


def fuse_batch(alpha_a: np.ndarray, labels_a: Sequence[int],
               alpha_b: np.ndarray, labels_b: Sequence[int]) -> Tuple[np.ndarray, Tuple[int, ...]]:
    """Row-wise fuse() for (N, n) and (N, m) concentration batches."""
    alpha_a, alpha_b = np.asarray(alpha_a), np.asarray(alpha_b)
    if alpha_a.shape[-1] == 0 or alpha_b.shape[-1] == 0:
        raise DirichletError("fuse: empty label set")
    overlap = set(labels_a) & set(labels_b)
    if overlap:
        raise DirichletError(f"fuse: label sets overlap on {sorted(overlap)}")
    if alpha_a.shape[0] != alpha_b.shape[0]:
        raise DirichletError(f"fuse: batch sizes differ ({alpha_a.shape[0]} vs {alpha_b.shape[0]})")
    return np.concatenate([alpha_a, alpha_b], axis=-1), tuple(labels_a) + tuple(labels_b)


# ---------------------------------------------------------------------- #
# Sampling
# ---------------------------------------------------------------------- #
def sample(d, seed: Union[int, np.random.Generator], size: Optional[int] = None) -> Union[SimplexPoint, np.ndarray]:
    """
    Draw from Dir(alpha) by normalizing K independent Gamma(alpha_k, 1) variates.

    Args:
        d: Dirichlet parameters
        seed: Integer seed or an existing Generator (one per thread)
        size: None for a single SimplexPoint, otherwise number of draws (returned as (size, K))
    """
    d = _params(d)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    shape = (1 if size is None else size, d.K)
    gammas = rng.gamma(d.alpha, 1.0, size=shape)
    draws = gammas / gammas.sum(axis=-1, keepdims=True)
    return SimplexPoint(draws[0]) if size is None else draws
