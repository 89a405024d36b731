"""
IDX Files

Reader and writer for the big-endian IDX format MNIST ships in:
magic 2051 (0x00000803) for unsigned-byte images with 3 dimensions and
magic 2049 (0x00000801) for unsigned-byte labels with 1 dimension.
Files ending in .gz are decompressed transparently.
"""

import gzip
import logging
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from data.dataset import Dataset
from utils.errors import IdxFormatError

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049

PathLike = Union[str, Path]


def _read_bytes(path: PathLike) -> bytes:
    path = Path(path)
    try:
        if path.suffix == '.gz':
            with gzip.open(path, 'rb') as handle:
                return handle.read()
        return path.read_bytes()
    except (OSError, EOFError) as exc:
        raise IdxFormatError(f"cannot read IDX file {path}: {exc}") from exc


def _header(raw: bytes, path: PathLike, expected_magic: int, dims: int):
    if len(raw) < 4 + 4 * dims:
        raise IdxFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, = struct.unpack('>I', raw[:4])
    if magic != expected_magic:
        raise IdxFormatError(f"{path}: wrong magic number 0x{magic:08x} (expected 0x{expected_magic:08x})")
    return struct.unpack('>' + 'I' * dims, raw[4:4 + 4 * dims])


def read_idx_images(path: PathLike, limit: Optional[int] = None) -> np.ndarray:
    """Images as uint8 array (N, rows, cols)."""
    raw = _read_bytes(path)
    count, rows, cols = _header(raw, path, IMAGES_MAGIC, 3)
    payload = raw[16:]
    needed = count * rows * cols
    if len(payload) < needed:
        raise IdxFormatError(f"{path}: truncated payload ({len(payload)} of {needed} bytes)")
    images = np.frombuffer(payload, dtype=np.uint8, count=needed).reshape(count, rows, cols)
    return images[:limit] if limit is not None else images


def read_idx_labels(path: PathLike, limit: Optional[int] = None) -> np.ndarray:
    raw = _read_bytes(path)
    count, = _header(raw, path, LABELS_MAGIC, 1)
    payload = raw[8:]
    if len(payload) < count:
        raise IdxFormatError(f"{path}: truncated payload ({len(payload)} of {count} bytes)")
    labels = np.frombuffer(payload, dtype=np.uint8, count=count)
    return labels[:limit] if limit is not None else labels


def load_idx(images_path: PathLike, labels_path: PathLike, num_classes: int = 10,
             limit: Optional[int] = None, name: str = 'mnist') -> Dataset:
    """
    Load an image/label IDX pair as a Dataset with pixels scaled by 1/255.

    Args:
        images_path: IDX3 image file
        labels_path: IDX1 label file
        num_classes: K (labels must be below it)
        limit: Keep only the first `limit` samples

    Raises:
        IdxFormatError: wrong magic, count mismatch, truncation or out-of-range labels
    """
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(f"count mismatch: {images.shape[0]} images vs {labels.shape[0]} labels")
    if labels.size and labels.max() >= num_classes:
        raise IdxFormatError(f"{labels_path}: label {labels.max()} outside [0, {num_classes})")
    if limit is not None:
        images, labels = images[:limit], labels[:limit]
    logger.debug(f"Loaded {images.shape[0]} IDX images of {images.shape[1]}x{images.shape[2]} from {images_path}")
    samples = (images.astype(np.float64) / 255.0)[..., None]
    return Dataset(samples, labels.astype(np.int64), num_classes, name)


def write_idx_images(path: PathLike, images: np.ndarray) -> None:
    images = np.asarray(images, dtype=np.uint8)
    count, rows, cols = images.shape
    Path(path).write_bytes(struct.pack('>IIII', IMAGES_MAGIC, count, rows, cols) + images.tobytes())


def write_idx_labels(path: PathLike, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    Path(path).write_bytes(struct.pack('>II', LABELS_MAGIC, labels.shape[0]) + labels.tobytes())
