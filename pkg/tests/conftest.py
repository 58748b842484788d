import struct

import numpy as np
import pytest

from config.settings import settings_manager
from utils.features import LabeledDataset


def bmp_bytes(rgb: np.ndarray, top_down: bool = False, bit_count: int = 24, compression: int = 0,
              signature: bytes = b'BM') -> bytes:
    """Hand-assembled 24-bit BMP for an (h, w, 3) RGB array"""
    rgb = np.asarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    stride = (w * 3 + 3) & ~3
    rows = rgb[:, :, ::-1] if top_down else rgb[::-1, :, ::-1]
    body = b''.join(r.tobytes() + b'\x00' * (stride - w * 3) for r in rows)
    info = struct.pack('<IiiHHIIiiII', 40, w, -h if top_down else h, 1, bit_count, compression,
                       len(body), 2835, 2835, 0, 0)
    header = struct.pack('<2sIHHI', signature, 14 + len(info) + len(body), 0, 0, 14 + len(info))
    return header + info + body


def blobs(centers, per_class: int, spread: float, seed: int = 0) -> LabeledDataset:
    rng = np.random.default_rng(seed)
    X, y = [], []
    for label, center in enumerate(centers):
        X.append(np.asarray(center, dtype=float) + rng.normal(0.0, spread, (per_class, len(center))))
        y.extend([label] * per_class)
    return LabeledDataset(np.vstack(X), np.array(y))


def informative_dataset(n_informative: int, n_noise: int, per_class: int = 30, shift: float = 1.5,
                        seed: int = 0) -> LabeledDataset:
    """Two classes separated along the first n_informative columns; the rest is unit noise"""
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], per_class)
    X = rng.normal(0.0, 1.0, (2 * per_class, n_informative + n_noise))
    X[y == 1, :n_informative] += shift
    return LabeledDataset(X, y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def ci_config(tmp_path):
    return settings_manager.load(preset='ci', out=str(tmp_path / 'out'), overrides=['workers=1'])
