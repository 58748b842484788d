"""
Imaging Module - palm image decoding and preprocessing
Grayscale decode, contrast-limited adaptive histogram equalization, negative image and resize
"""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Tuple

import cv2
import numpy as np

from utils.errors import DecodeError, ParameterError

logger = logging.getLogger(__name__)

# ITU-R BT.601 luma weights
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

_BMP_FILE_HEADER = struct.Struct('<2sIHHI')
_BMP_INFO_HEADER = struct.Struct('<IiiHHIIiiII')


@dataclass(frozen=True)
class GrayImage:
    """8-bit grayscale image; pixels is a read-only (height, width) uint8 array"""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.size == 0:
            raise ParameterError(f"image must be a non-empty 2-D array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.min() < 0 or arr.max() > 255:
                raise ParameterError("pixel intensities must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        else:
            arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, 'pixels', arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))


@dataclass(frozen=True)
class AheParams:
    """Contrast-limited adaptive histogram equalization parameters"""

    tile_grid: Tuple[int, int] = (8, 8)
    clip_limit: float = 2.0
    bins: int = 256

    def __post_init__(self):
        grid = tuple(int(v) for v in self.tile_grid)
        if len(grid) != 2 or min(grid) < 1:
            raise ParameterError(f"tile_grid must be two positive integers, got {self.tile_grid}")
        object.__setattr__(self, 'tile_grid', grid)
        if self.clip_limit < 1.0:
            raise ParameterError(f"clip_limit must be >= 1.0, got {self.clip_limit}")
        if not 2 <= self.bins <= 256:
            raise ParameterError(f"bins must be in [2, 256] for 8-bit images, got {self.bins}")


def luminance(rgb: np.ndarray) -> np.ndarray:
    """Y = round(0.299 R + 0.587 G + 0.114 B) for an (..., 3) RGB array"""
    rgb = np.asarray(rgb, dtype=np.float64)
    y = rgb[..., 0] * LUMA_WEIGHTS[0] + rgb[..., 1] * LUMA_WEIGHTS[1] + rgb[..., 2] * LUMA_WEIGHTS[2]
    return np.clip(np.rint(y), 0, 255).astype(np.uint8)


def decode_bmp(data: bytes) -> GrayImage:
    """Decode an uncompressed 24-bit BMP (bottom-up or top-down) into a luminance image"""
    if len(data) < _BMP_FILE_HEADER.size + _BMP_INFO_HEADER.size:
        raise DecodeError(f"header: expected at least 54 bytes, got {len(data)}")

    signature, _, _, _, offset = _BMP_FILE_HEADER.unpack_from(data, 0)
    if signature != b'BM':
        raise DecodeError(f"signature: expected b'BM', got {signature!r}")

    (header_size, width, height, planes, bit_count,
     compression, _, _, _, _, _) = _BMP_INFO_HEADER.unpack_from(data, _BMP_FILE_HEADER.size)
    if header_size < 40:
        raise DecodeError(f"header_size: BITMAPINFOHEADER (40 bytes) or later required, got {header_size}")
    if width <= 0:
        raise DecodeError(f"width: must be positive, got {width}")
    if height == 0:
        raise DecodeError("height: must be non-zero")
    if planes != 1:
        raise DecodeError(f"planes: must be 1, got {planes}")
    if bit_count != 24:
        raise DecodeError(f"bit_count: only 24-bit bitmaps are supported, got {bit_count}")
    if compression != 0:
        raise DecodeError(f"compression: only uncompressed (BI_RGB) bitmaps are supported, got {compression}")

    rows = abs(height)
    stride = (width * 3 + 3) & ~3
    if offset < _BMP_FILE_HEADER.size + header_size or offset + stride * rows > len(data):
        raise DecodeError(f"pixel_offset: {offset} leaves fewer than {stride * rows} bytes of pixel data")

    raw = np.frombuffer(data, dtype=np.uint8, count=stride * rows, offset=offset)
    bgr = raw.reshape(rows, stride)[:, :width * 3].reshape(rows, width, 3)
    if height > 0:
        bgr = bgr[::-1]
    return GrayImage(luminance(bgr[..., ::-1]))


def decode_pgm(data: bytes) -> GrayImage:
    """Decode an 8-bit binary PGM (P5)"""
    if data[:2] != b'P5':
        raise DecodeError(f"magic: expected b'P5', got {data[:2]!r}")
    arr = cv2.imdecode(np.frombuffer(data, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if arr is None or arr.ndim != 2:
        raise DecodeError("body: malformed PGM data")
    if arr.dtype != np.uint8:
        raise DecodeError(f"maxval: only 8-bit PGM is supported, got {arr.dtype}")
    return GrayImage(arr)


def encode_pgm(img: GrayImage) -> bytes:
    """Encode as binary PGM (P5)"""
    ok, buf = cv2.imencode('.pgm', np.ascontiguousarray(img.pixels))
    if not ok:
        raise DecodeError("encode: OpenCV could not encode PGM")
    return buf.tobytes()


def decode_image(data: bytes) -> GrayImage:
    """Decode BMP or PGM bytes based on the magic number"""
    if data[:2] == b'BM':
        return decode_bmp(data)
    if data[:2] == b'P5':
        return decode_pgm(data)
    raise DecodeError(f"magic: unsupported image format {data[:2]!r} (BMP or PGM P5 expected)")


def load_image(path) -> GrayImage:
    """Read and decode an image file"""
    return decode_image(Path(path).read_bytes())


def adaptive_hist_eq(img: GrayImage, params: AheParams = AheParams()) -> GrayImage:
    """Contrast-limited adaptive histogram equalization.

    Tiles that do not divide the image evenly are completed by edge replication,
    the padded image is equalized with per-tile clipped histograms and bilinear
    interpolation of the tile mappings, and the padding is cropped away. With fewer
    than 256 bins the intensities are first quantized to that many evenly spaced
    levels and the clip limit is scaled so it stays relative to one level.
    """
    rows, cols = params.tile_grid
    if img.height < rows or img.width < cols:
        raise ParameterError(
            f"image {img.width}x{img.height} is smaller than one tile of a {rows}x{cols} grid")

    pad_h = -img.height % rows
    pad_w = -img.width % cols
    padded = np.pad(img.pixels, ((0, pad_h), (0, pad_w)), mode='edge')
    clip = float(params.clip_limit)
    if params.bins < 256:
        levels = padded.astype(np.int32) * params.bins // 256
        padded = np.rint(levels * (255.0 / (params.bins - 1))).astype(np.uint8)
        clip *= 256.0 / params.bins

    # OpenCV takes the grid as (tiles along x, tiles along y)
    clahe = cv2.createCLAHE(clipLimit=clip, tileGridSize=(cols, rows))
    out = clahe.apply(np.ascontiguousarray(padded))
    return GrayImage(out[:img.height, :img.width])


def negative(img: GrayImage) -> GrayImage:
    """255 - pixel, an involution"""
    return GrayImage(255 - img.pixels)


def resize(img: GrayImage, w: int, h: int) -> GrayImage:
    """Bilinear resize to (w, h), rounded and clamped to [0, 255]"""
    if w < 1 or h < 1:
        raise ParameterError(f"target size must be at least 1x1, got {w}x{h}")
    if (w, h) == (img.width, img.height):
        return img
    out = cv2.resize(img.pixels.astype(np.float32), (int(w), int(h)), interpolation=cv2.INTER_LINEAR)
    return GrayImage(np.clip(np.rint(out), 0, 255).astype(np.uint8))


def intensity_histogram(img: GrayImage) -> np.ndarray:
    """256-bin intensity histogram"""
    return np.bincount(img.pixels.ravel(), minlength=256)


def preprocess_stages(img: GrayImage, params: AheParams, size: int) -> Dict[str, GrayImage]:
    """Every preprocessing stage in order: grayscale, equalized, negative, resized"""
    equalized = adaptive_hist_eq(img, params)
    inverted = negative(equalized)
    return {
        'grayscale': img,
        'equalized': equalized,
        'negative': inverted,
        'resized': resize(inverted, size, size),
    }


def preprocess(img: GrayImage, params: AheParams, size: int) -> GrayImage:
    """Equalize, invert and resize a grayscale palm image"""
    return resize(negative(adaptive_hist_eq(img, params)), size, size)
