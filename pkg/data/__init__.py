"""
Data Module

Dataset container, IDX ingestion, synthetic generators, image rotation and
risk-matrix constructors.
"""

from .dataset import Dataset
from .idx import load_idx, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels
from .synthetic import SyntheticSpec, synth, synth_ood, noise_images, blob_centers
from .transforms import rotate
from .risk_matrices import mnist_risk_matrix, grouped_risk_matrix, cifar10_risk_matrix, resolve_risk_matrix

__all__ = [
    'Dataset',
    'load_idx',
    'read_idx_images',
    'read_idx_labels',
    'write_idx_images',
    'write_idx_labels',
    'SyntheticSpec',
    'synth',
    'synth_ood',
    'noise_images',
    'blob_centers',
    'rotate',
    'mnist_risk_matrix',
    'grouped_risk_matrix',
    'cifar10_risk_matrix',
    'resolve_risk_matrix',
]
