"""
Wavelet Module - multi-level orthonormal Haar 2D-DWT
Builds the nested-quadrant coefficient layout and flattens it into raw feature vectors
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple

import numpy as np
import pywt

from utils.errors import DimensionError, ParameterError

# periodization keeps every level exactly half the size and the transform orthonormal
_WAVELET = 'haar'
_MODE = 'periodization'

BAND_NAMES = ('LL', 'LH', 'HL', 'HH')


class SubbandSelection(str, Enum):
    ALL = 'all'
    LL_ONLY = 'll_only'
    DEEPEST_LEVEL = 'deepest_level'

    @classmethod
    def parse(cls, value) -> 'SubbandSelection':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ', '.join(m.value for m in cls)
            raise ParameterError(f"unknown subband selection {value!r} (expected one of {names})")


@dataclass(frozen=True)
class DwtPyramid:
    """Coefficients in the standard nested layout.

    At level k the region [0:h/2^(k-1), 0:w/2^(k-1)] holds LL_k top-left, HL_k top-right,
    LH_k bottom-left and HH_k bottom-right; only the deepest LL survives.
    """

    levels: int
    layout: np.ndarray

    def band(self, level: int, name: str) -> np.ndarray:
        """View of one subband; level 1 is the finest"""
        if not 1 <= level <= self.levels:
            raise ParameterError(f"level must be in [1, {self.levels}], got {level}")
        if name not in BAND_NAMES:
            raise ParameterError(f"band must be one of {BAND_NAMES}, got {name!r}")
        if name == 'LL' and level != self.levels:
            raise ParameterError(f"only the deepest level ({self.levels}) keeps its LL band")
        h = self.layout.shape[0] >> level
        w = self.layout.shape[1] >> level
        top, left = {'LL': (0, 0), 'HL': (0, w), 'LH': (h, 0), 'HH': (h, w)}[name]
        return self.layout[top:top + h, left:left + w]


def _check_divisible(shape: Tuple[int, int], levels: int):
    if levels < 1:
        raise ParameterError(f"levels must be positive, got {levels}")
    divisor = 2 ** levels
    if shape[0] % divisor or shape[1] % divisor:
        raise DimensionError(
            f"dimensions {shape[1]}x{shape[0]} must be divisible by {divisor} for {levels} levels")


def dwt2_forward(img, levels: int = 2) -> DwtPyramid:
    """Separable orthonormal Haar transform recursed on the approximation band"""
    x = np.asarray(img, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"input must be a 2-D matrix, got shape {x.shape}")
    _check_divisible(x.shape, levels)

    layout = np.empty_like(x)
    approx = x
    for _ in range(levels):
        h, w = approx.shape
        ll, (lh, hl, hh) = pywt.dwt2(approx, _WAVELET, mode=_MODE)
        hh2, hw2 = h // 2, w // 2
        layout[:hh2, hw2:w] = hl
        layout[hh2:h, :hw2] = lh
        layout[hh2:h, hw2:w] = hh
        approx = ll
    layout[:approx.shape[0], :approx.shape[1]] = approx
    return DwtPyramid(levels=levels, layout=layout)


def dwt2_inverse(pyr: DwtPyramid) -> np.ndarray:
    """Exact inverse of dwt2_forward"""
    layout = pyr.layout
    H, W = layout.shape
    approx = layout[:H >> pyr.levels, :W >> pyr.levels].copy()
    for level in range(pyr.levels, 0, -1):
        h, w = H >> (level - 1), W >> (level - 1)
        hh2, hw2 = h // 2, w // 2
        details = (layout[hh2:h, :hw2], layout[:hh2, hw2:w], layout[hh2:h, hw2:w])
        approx = pywt.idwt2((approx, details), _WAVELET, mode=_MODE)
    return approx


def _band_order(levels: int, mode: SubbandSelection) -> List[Tuple[int, str]]:
    order = [(levels, name) for name in BAND_NAMES]
    if mode is SubbandSelection.LL_ONLY:
        return order[:1]
    if mode is SubbandSelection.DEEPEST_LEVEL:
        return order
    for level in range(levels - 1, 0, -1):
        order.extend((level, name) for name in BAND_NAMES[1:])
    return order


def extract_features(pyr: DwtPyramid, sel=SubbandSelection.ALL) -> np.ndarray:
    """Flatten the selected subbands: LL, LH, HL, HH, deepest level first, row-major within a band"""
    mode = SubbandSelection.parse(sel)
    return np.concatenate([pyr.band(level, name).ravel() for level, name in _band_order(pyr.levels, mode)])


def feature_length(height: int, width: int, levels: int, sel=SubbandSelection.ALL) -> int:
    """Length of the vector extract_features produces for an image of this size"""
    _check_divisible((height, width), levels)
    mode = SubbandSelection.parse(sel)
    deepest = (height >> levels) * (width >> levels)
    if mode is SubbandSelection.LL_ONLY:
        return deepest
    if mode is SubbandSelection.DEEPEST_LEVEL:
        return 4 * deepest
    return height * width
