"""
Command Inputs

Turns a RunConfig into the datasets, risk matrix and output directory a
command works with, and writes training logs.
"""

import logging
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from data.dataset import Dataset
from data.idx import load_idx
from data.risk_matrices import resolve_risk_matrix
from data.synthetic import SyntheticSpec, noise_images, synth, synth_ood
from evidential.risk import RiskMatrix
from models.training import EpochRecord
from utils.config import RunConfig
from utils.errors import ConfigError

logger = logging.getLogger(__name__)

LOG_COLUMNS = ['epoch', 'loss', 'lambda', 'acc', 'cost']


def synthetic_spec(config: RunConfig) -> Optional[SyntheticSpec]:
    return SyntheticSpec.parse(config.synth, seed=config.seed) if config.synth else None


def load_dataset(config: RunConfig) -> Dataset:
    """
    The labelled dataset named by the config.

    --classes keeps (and relabels) a class subset before --limit caps the size.
    """
    spec = synthetic_spec(config)
    if spec is not None:
        data = synth(spec)
    else:
        images = config.resolve_path(config.data_images)
        data = load_idx(images, config.resolve_path(config.data_labels), name=Path(images).name.split('.')[0])
    if config.classes:
        data = data.select_classes(config.classes)
    if config.limit is not None:
        data = data.subset(config.limit)
    logger.info(f"Dataset {data.name}: {len(data)} samples, K={data.num_classes}, shape {data.feature_shape}")
    return data


def load_ood(config: RunConfig, data: Dataset) -> Optional[Dataset]:
    """
    Out-of-distribution inputs: 'noise' (uniform images), 'synth' (points far
    from the training blobs) or 'idx:<images>,<labels>' (another IDX set).
    Labels of the OoD set are placeholders.
    """
    if not config.ood:
        return None
    n = len(data)
    if config.ood == 'noise':
        if not data.is_image:
            raise ConfigError("--ood noise needs an image dataset")
        return noise_images(n, data.feature_shape, seed=config.seed, num_classes=data.num_classes)
    if config.ood == 'synth':
        spec = synthetic_spec(config)
        if spec is None:
            raise ConfigError("--ood synth needs a --synth dataset")
        return synth_ood(spec, n, seed=config.seed + 1)
    if config.ood.startswith('idx:'):
        images, _, labels = config.ood[4:].partition(',')
        if not labels:
            raise ConfigError("--ood idx: expects idx:<images>,<labels>")
        other = load_idx(config.resolve_path(images), config.resolve_path(labels), limit=n, name='ood')
        return Dataset(other.samples, np.zeros(len(other), dtype=np.int64), data.num_classes, 'ood')
    raise ConfigError(f"unknown --ood source '{config.ood}' (noise, synth or idx:<images>,<labels>)")


def load_risk(config: RunConfig, K: int) -> Optional[RiskMatrix]:
    return resolve_risk_matrix(config.risk_matrix, K)


def prepare_out_dir(config: RunConfig) -> Path:
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_train_log(history: List[EpochRecord], path: Path) -> Path:
    """train_log.csv with columns epoch,loss,lambda,acc,cost (cost blank without a risk matrix)."""
    pd.DataFrame([record.as_row() for record in history], columns=LOG_COLUMNS).to_csv(path, index=False)
    return path
