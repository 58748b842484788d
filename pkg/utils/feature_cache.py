"""
Binary feature-matrix cache
Layout (little-endian): magic b'PVFM', uint32 version, uint64 n, uint64 d, n*d float64 row-major, n int32 labels.
"""

import hashlib
import json
import logging
import struct
from pathlib import Path
from typing import Optional

import numpy as np

from utils.errors import DatasetError
from utils.features import LabeledDataset

logger = logging.getLogger(__name__)

MAGIC = b'PVFM'
VERSION = 1
_HEADER = struct.Struct('<4sIQQ')


def save_feature_cache(path, data: LabeledDataset) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = _HEADER.pack(MAGIC, VERSION, data.n_samples, data.n_features)
    body = np.ascontiguousarray(data.X, dtype='<f8').tobytes() + data.y.astype('<i4').tobytes()
    path.write_bytes(header + body)
    logger.debug("cached %dx%d features at %s", data.n_samples, data.n_features, path)
    return path


def load_feature_cache(path) -> LabeledDataset:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise DatasetError(f"{path}: cannot read feature cache ({e})") from e
    if len(raw) < _HEADER.size:
        raise DatasetError(f"{path}: truncated feature cache header")
    magic, version, n, d = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise DatasetError(f"{path}: not a feature cache (magic {magic!r})")
    if version != VERSION:
        raise DatasetError(f"{path}: unsupported feature cache version {version}")
    expected = _HEADER.size + 8 * n * d + 4 * n
    if len(raw) != expected:
        raise DatasetError(f"{path}: expected {expected} bytes for {n}x{d} features, got {len(raw)}")
    X = np.frombuffer(raw, dtype='<f8', count=n * d, offset=_HEADER.size).reshape(n, d)
    y = np.frombuffer(raw, dtype='<i4', count=n, offset=_HEADER.size + 8 * n * d)
    return LabeledDataset(X.astype(np.float64), y.astype(np.int64))


def cache_key(**parts) -> str:
    """Stable short digest of JSON-serialisable cache inputs"""
    blob = json.dumps(parts, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def cached_path(cache_dir, key: str) -> Optional[Path]:
    if cache_dir is None:
        return None
    return Path(cache_dir) / f"features-{key}.pvfm"
