"""
Shared fixtures: seeded generators, small synthetic datasets, IDX files and
tiny trained models.
"""

import os
from pathlib import Path

import numpy as np
import pytest

from data.dataset import Dataset
from data.idx import write_idx_images, write_idx_labels
from data.synthetic import SyntheticSpec, synth
from models.backbones import BackboneSpec
from models.training import pretrain_softmax, train_edl


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope='session')
def two_blobs():
    """Two well separated classes at (3, 0) and (-3, 0)."""
    return synth(SyntheticSpec('blobs', num_classes=2, per_class=100, sigma=0.1, seed=0))


@pytest.fixture(scope='session')
def three_blobs():
    return synth(SyntheticSpec('blobs', num_classes=3, per_class=60, sigma=0.25, seed=0))


@pytest.fixture(scope='session')
def edl_model(three_blobs):
    return train_edl(BackboneSpec.parse('mlp:16'), three_blobs, epochs=30, lr=1e-2, act='softplus', seed=0)


@pytest.fixture(scope='session')
def softmax_model(three_blobs):
    return pretrain_softmax(BackboneSpec.parse('mlp:16'), three_blobs, epochs=20, lr=1e-2, seed=0)


def bar_images(n: int, seed: int = 0, size: int = 28):
    """Label 1: vertical bar, label 0: horizontal bar, both with light noise."""
    gen = np.random.default_rng(seed)
    images = gen.uniform(0, 40, (n, size, size))
    labels = np.arange(n) % 2
    middle = size // 2
    for index, label in enumerate(labels):
        if label == 1:
            images[index, 4:size - 4, middle - 1:middle + 2] = 255
        else:
            images[index, middle - 1:middle + 2, 4:size - 4] = 255
    return images.astype(np.uint8), labels


@pytest.fixture
def idx_files(tmp_path):
    """(images_path, labels_path) of a 40-sample IDX pair."""
    images, labels = bar_images(40)
    images_path, labels_path = tmp_path / 'images-idx3-ubyte', tmp_path / 'labels-idx1-ubyte'
    write_idx_images(images_path, images)
    write_idx_labels(labels_path, labels)
    return images_path, labels_path


@pytest.fixture
def tiny_images():
    gen = np.random.default_rng(3)
    return Dataset(gen.uniform(0, 1, (6, 16, 16, 1)), np.arange(6) % 3, 3, name='tiny')


@pytest.fixture(scope='session')
def mnist_dir():
    """Directory with the MNIST IDX files; MNIST-scale tests skip without it."""
    path = os.getenv('EDL_MNIST_DIR')
    if not path or not Path(path).is_dir():
        pytest.skip("EDL_MNIST_DIR not set")
    return Path(path)
