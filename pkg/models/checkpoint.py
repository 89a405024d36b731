"""
Checkpoint Files

Binary layout, all integers little-endian uint32:

    magic     8 bytes  b'EDLCKPT\\x00'
    version   uint32
    hlen      uint32   length of the JSON header
    header    hlen bytes of UTF-8 JSON (backbone, input shape, K, mode,
              activation, labels, frozen groups, head flag, metadata)
    count     uint32   number of parameter records
    records   name length, name, ndim, dims..., raw float64 payload

Headers are written with sorted keys and no timestamps, so identical models
produce byte-identical files.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from models.backbones import BackboneSpec
from models.evidence_model import EvidenceModel
from utils.errors import (
    CheckpointError,
    CheckpointMagicError,
    CheckpointShapeError,
    CheckpointTruncatedError,
    CheckpointVersionError,
)

logger = logging.getLogger(__name__)

MAGIC = b'EDLCKPT\x00'
FORMAT_VERSION = 1

PathLike = Union[str, Path]


def _header(model: EvidenceModel, metadata: Optional[dict]) -> dict:
    return {
        'backbone': model.spec.describe(),
        'input_shape': list(model.input_shape),
        'num_classes': model.num_classes,
        'mode': model.mode,
        'activation': model.activation,
        'labels': list(model.labels),
        'frozen': list(model.frozen_groups),
        'head': model.head is not None,
        'metadata': metadata or {},
    }


def save(model: EvidenceModel, path: PathLike, metadata: Optional[dict] = None) -> Path:
    """
    Write the model to path.

    Args:
        model: Model to persist
        path: Destination file (parent directories are created)
        metadata: Training metadata (mode, epochs, seed, ...); must be JSON-serializable
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = json.dumps(_header(model, metadata), sort_keys=True, separators=(',', ':')).encode('utf-8')
    named = model.named_parameters()
    chunks = [MAGIC, struct.pack('<II', FORMAT_VERSION, len(header)), header, struct.pack('<I', len(named))]
    for name, tensor in named:
        encoded = name.encode('utf-8')
        chunks.append(struct.pack('<I', len(encoded)) + encoded)
        chunks.append(struct.pack('<I', tensor.ndim) + struct.pack(f'<{tensor.ndim}I', *tensor.shape))
        chunks.append(np.ascontiguousarray(tensor.data, dtype='<f8').tobytes())
    path.write_bytes(b''.join(chunks))
    logger.debug(f"Saved {len(named)} parameter tensors to {path}")
    return path


class _Reader:
    def __init__(self, raw: bytes, path: PathLike):
        self.raw = raw
        self.offset = 0
        self.path = path

    def take(self, size: int, what: str) -> bytes:
        if self.offset + size > len(self.raw):
            raise CheckpointTruncatedError(f"{self.path}: truncated while reading {what} "
                                           f"(need {size} bytes at offset {self.offset}, file has {len(self.raw)})")
        chunk = self.raw[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def uint(self, what: str) -> int:
        return struct.unpack('<I', self.take(4, what))[0]


def read_header(path: PathLike) -> dict:
    """Validate magic and version and return the JSON header without building the model."""
    header, _ = _open(path)
    return header


def _open(path: PathLike):
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    reader = _Reader(raw, path)
    if reader.take(len(MAGIC), 'magic') != MAGIC:
        raise CheckpointMagicError(f"{path}: not a checkpoint (bad magic bytes)")
    version = reader.uint('version')
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"{path}: checkpoint format version {version}, expected {FORMAT_VERSION}")
    size = reader.uint('header length')
    try:
        header = json.loads(reader.take(size, 'header').decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint header: {exc}") from exc
    return header, reader


def load(path: PathLike, num_classes: Optional[int] = None) -> EvidenceModel:
    """
    Read a model written by save().

    Args:
        path: Checkpoint file
        num_classes: Expected K; a different K is a shape error

    Raises:
        CheckpointMagicError, CheckpointVersionError, CheckpointTruncatedError,
        CheckpointShapeError, CheckpointError
    """
    header, reader = _open(path)
    K = int(header['num_classes'])
    if num_classes is not None and num_classes != K:
        raise CheckpointShapeError(f"{path}: checkpoint has K={K}, expected K={num_classes}")

    model = EvidenceModel.create(BackboneSpec.parse(header['backbone']), header['input_shape'], K,
                                 mode=header['mode'], activation=header['activation'], labels=header['labels'])
    if header['head']:
        model.attach_head()
    expected = dict(model.named_parameters())

    count = reader.uint('record count')
    if count != len(expected):
        raise CheckpointShapeError(f"{path}: {count} parameter records, architecture needs {len(expected)}")
    for _ in range(count):
        name = reader.take(reader.uint('name length'), 'parameter name').decode('utf-8', errors='replace')
        ndim = reader.uint(f'{name} rank')
        shape = struct.unpack(f'<{ndim}I', reader.take(4 * ndim, f'{name} shape'))
        if name not in expected:
            raise CheckpointShapeError(f"{path}: unexpected parameter '{name}'")
        target = expected[name]
        if tuple(shape) != target.shape:
            raise CheckpointShapeError(f"{path}: parameter '{name}' has shape {tuple(shape)}, "
                                       f"architecture needs {target.shape}")
        payload = reader.take(8 * int(np.prod(shape, dtype=np.int64)), f'{name} payload')
        target.data = np.frombuffer(payload, dtype='<f8').astype(np.float64).reshape(shape)
    if reader.offset != len(reader.raw):
        raise CheckpointError(f"{path}: {len(reader.raw) - reader.offset} trailing bytes after the last record")

    model.freeze(*header['frozen'])
    model.metadata = header['metadata']
    logger.debug(f"Loaded {model!r} from {path}")
    return model