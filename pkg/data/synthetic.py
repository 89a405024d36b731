"""
Synthetic Datasets

Desk-scale stand-ins for image benchmarks: Gaussian blobs at fixed centers,
two moons, out-of-distribution companions placed at least 10 sigma from every
blob center, and uniform-noise images.
"""

from dataclasses import dataclass, replace
from typing import Dict

import numpy as np
from sklearn.datasets import make_blobs, make_moons

from data.dataset import Dataset
from utils.errors import ConfigError

GENERATORS = ('blobs', 'moons')


@dataclass(frozen=True)
class SyntheticSpec:
    """
    Parameters of a synthetic task.

    Args:
        generator: 'blobs' or 'moons'
        num_classes: K (moons is always 2)
        per_class: Samples per class
        sigma: Noise standard deviation
        seed: Generator seed
        dim: Feature dimension for blobs
        radius: Distance of blob centers from the origin
    """
    generator: str = 'blobs'
    num_classes: int = 3
    per_class: int = 200
    sigma: float = 0.1
    seed: int = 0
    dim: int = 2
    radius: float = 3.0

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ConfigError(f"unknown synthetic generator '{self.generator}'")
        if self.generator == 'moons' and self.num_classes != 2:
            raise ConfigError("moons always has K=2")
        if self.num_classes < 2 or self.per_class < 1 or self.sigma < 0 or self.dim < 2:
            raise ConfigError(f"invalid synthetic spec {self}")

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> 'SyntheticSpec':
        """
        Parse 'blobs:K=3,n=200,sigma=0.1' (keys: K, n, sigma, seed, dim, radius).

        Example:
            >>> SyntheticSpec.parse('moons:K=2,n=100,sigma=0.2')
        """
        generator, _, rest = text.partition(':')
        keys = {'K': ('num_classes', int), 'n': ('per_class', int), 'sigma': ('sigma', float),
                'seed': ('seed', int), 'dim': ('dim', int), 'radius': ('radius', float)}
        values: Dict[str, object] = {'generator': generator.strip(), 'seed': seed}
        if generator.strip() == 'moons':
            values['num_classes'] = 2
        for item in filter(None, (part.strip() for part in rest.split(','))):
            key, _, raw = item.partition('=')
            if key not in keys:
                raise ConfigError(f"unknown synthetic key '{key}' in '{text}'")
            field_name, kind = keys[key]
            try:
                values[field_name] = kind(raw)
            except ValueError:
                raise ConfigError(f"bad value for '{key}' in '{text}'") from None
        return cls(**values)

    def with_seed(self, seed: int) -> 'SyntheticSpec':
        return replace(self, seed=seed)


def blob_centers(spec: SyntheticSpec) -> np.ndarray:
    """K centers evenly spaced on a circle of the given radius in the first two coordinates."""
    angles = 2.0 * np.pi * np.arange(spec.num_classes) / spec.num_classes
    centers = np.zeros((spec.num_classes, spec.dim))
    centers[:, 0] = spec.radius * np.cos(angles)
    centers[:, 1] = spec.radius * np.sin(angles)
    return centers


def synth(spec: SyntheticSpec) -> Dataset:
    """Generate the dataset described by spec (deterministic under spec.seed)."""
    if spec.generator == 'moons':
        samples, labels = make_moons(n_samples=2 * spec.per_class, noise=spec.sigma, random_state=spec.seed)
    else:
        samples, labels = make_blobs(n_samples=[spec.per_class] * spec.num_classes, centers=blob_centers(spec),
                                     cluster_std=spec.sigma, random_state=spec.seed)
    return Dataset(samples, labels, spec.num_classes, name=spec.generator)


def synth_ood(spec: SyntheticSpec, n: int, seed: int = 1) -> Dataset:
    """
    Points at least 10 sigma from every blob center (labels are placeholders, all 0).

    For blobs the points fill a disc around the origin when the centers sit
    more than 10 sigma away from it; otherwise they go on a ring outside all
    centers. Moons use a ring well outside both half circles.
    """
    rng = np.random.default_rng((spec.seed, seed, 99))
    margin = 10.0 * spec.sigma
    directions = rng.normal(size=(n, 2))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    if spec.generator == 'blobs' and spec.radius > margin:
        radii = 0.5 * (spec.radius - margin) * np.sqrt(rng.uniform(0.0, 1.0, n))
    else:
        outer = spec.radius if spec.generator == 'blobs' else 2.5
        radii = outer + margin + rng.uniform(0.5, 1.5, n)
    points = np.zeros((n, spec.dim if spec.generator == 'blobs' else 2))
    points[:, :2] = directions * radii[:, None]
    return Dataset(points, np.zeros(n, dtype=np.int64), spec.num_classes, name=f'{spec.generator}-ood')


def noise_images(n: int, shape=(28, 28, 1), seed: int = 0, num_classes: int = 10) -> Dataset:
    """Uniform-noise images in [0, 1] (labels are placeholders, all 0)."""
    rng = np.random.default_rng((seed, 11))
    return Dataset(rng.uniform(0.0, 1.0, (n,) + tuple(shape)), np.zeros(n, dtype=np.int64),
                   num_classes, name='noise')
