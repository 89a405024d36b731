"""
Dataset Container

Samples plus integer labels over K classes. Images are stored as
(N, H, W, C) floats in [0, 1]; vector data as (N, D).
"""

from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np

from utils.errors import DataError


@dataclass
class Dataset:
    """
    Labelled samples.

    Args:
        samples: (N, ...) float array
        labels: (N,) integer labels in [0, num_classes)
        num_classes: K
        name: Short label used in logs and reports
        label_ids: Original class ids for each of the K outputs (set by select_classes)
    """
    samples: np.ndarray
    labels: np.ndarray
    num_classes: int
    name: str = 'dataset'
    label_ids: Optional[Tuple[int, ...]] = field(default=None)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.samples.shape[0] != self.labels.shape[0]:
            raise DataError(f"{self.name}: {self.samples.shape[0]} samples but {self.labels.shape[0]} labels")
        if self.num_classes < 2:
            raise DataError(f"{self.name}: need at least 2 classes, got {self.num_classes}")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DataError(f"{self.name}: labels outside [0, {self.num_classes})")
        if self.is_image and self.samples.size and (self.samples.min() < 0 or self.samples.max() > 1):
            raise DataError(f"{self.name}: pixel values outside [0, 1]")
        if self.label_ids is None:
            self.label_ids = tuple(range(self.num_classes))
        elif len(self.label_ids) != self.num_classes:
            raise DataError(f"{self.name}: {len(self.label_ids)} label ids for {self.num_classes} classes")

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def is_image(self) -> bool:
        return self.samples.ndim == 4

    @property
    def feature_shape(self) -> Tuple[int, ...]:
        return self.samples.shape[1:]

    def subset(self, indices) -> 'Dataset':
        """Dataset restricted to the given indices (an int keeps the first n samples)."""
        if isinstance(indices, (int, np.integer)):
            indices = np.arange(min(int(indices), len(self)))
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.samples[indices], self.labels[indices], self.num_classes, self.name, self.label_ids)

    def select_classes(self, classes: Sequence[int], relabel: bool = True) -> 'Dataset':
        """
        Keep only samples of the given classes.

        With relabel=True the classes become 0..len(classes)-1 in the given
        order and label_ids remembers the original ids.
        """
        classes = [int(c) for c in classes]
        if len(set(classes)) != len(classes) or any(not 0 <= c < self.num_classes for c in classes):
            raise DataError(f"{self.name}: invalid class selection {classes}")
        mask = np.isin(self.labels, classes)
        if not relabel:
            return Dataset(self.samples[mask], self.labels[mask], self.num_classes, self.name, self.label_ids)
        lookup = {c: position for position, c in enumerate(classes)}
        labels = np.array([lookup[int(label)] for label in self.labels[mask]], dtype=np.int64)
        ids = tuple(self.label_ids[c] for c in classes)
        return Dataset(self.samples[mask], labels, len(classes), f"{self.name}[{','.join(map(str, ids))}]", ids)

    def batches(self, batch_size: int, rng: Optional[np.random.Generator] = None) -> Iterator[np.ndarray]:
        """Index batches; shuffled when an rng is given."""
        order = rng.permutation(len(self)) if rng is not None else np.arange(len(self))
        for start in range(0, len(self), batch_size):
            yield order[start:start + batch_size]

    def first_of_class(self, label: int) -> int:
        """Index of the first sample with the given label."""
        hits = np.flatnonzero(self.labels == label)
        if hits.size == 0:
            raise DataError(f"{self.name}: no sample of class {label}")
        return int(hits[0])
