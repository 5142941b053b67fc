"""Binary to grayscale image conversion.

Each byte becomes one pixel. Rows have a width chosen from the file size,
the last row is zero padded, and the result is box-resampled to the fixed
64x64 network input.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, InvalidImage

PLANE_SIDE = 64

KIB = 1024
# (exclusive upper bound in bytes, row width)
WIDTH_TABLE = (
    (10 * KIB, 32),
    (30 * KIB, 64),
    (60 * KIB, 128),
    (100 * KIB, 256),
    (200 * KIB, 384),
    (500 * KIB, 512),
    (1000 * KIB, 768),
)
MAX_WIDTH = 1024


@dataclass(frozen=True, eq=False)
class GrayImage:
    """One-channel 8-bit image; ``pixels`` has shape (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise InvalidImage(f"expected a non-empty 2-D pixel grid, got shape {px.shape}")
        if px.dtype != np.uint8:
            raise InvalidImage(f"pixels must be uint8, got {px.dtype}")

    @classmethod
    def from_rows(cls, rows) -> "GrayImage":
        arr = np.asarray(rows)
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise InvalidImage("pixel values must lie in 0..255")
        return cls(arr.astype(np.uint8))

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

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


def width_for_size(n: int) -> int:
    for bound, width in WIDTH_TABLE:
        if n < bound:
            return width
    return MAX_WIDTH


def bytes_to_image(data: bytes, width: int | None = None) -> GrayImage:
    """Lay ``data`` out row-major as an image.

    ``width`` overrides the size-based width table.
    """
    n = len(data)
    if n == 0:
        raise EmptyInput("cannot imagize an empty byte sequence")
    if width is None:
        width = width_for_size(n)
    elif width < 1:
        raise ValueError("width must be positive")
    height = -(-n // width)
    flat = np.zeros(height * width, dtype=np.uint8)
    flat[:n] = np.frombuffer(bytes(data), dtype=np.uint8)
    return GrayImage(flat.reshape(height, width))


def _overlap_matrix(src: int, dst: int) -> np.ndarray:
    """Integer overlap lengths between destination and source cells.

    Source cell r spans [r*dst, (r+1)*dst) and destination cell i spans
    [i*src, (i+1)*src) on a common axis of length src*dst, so every
    overlap is an exact integer and each row sums to ``src``.
    """
    i = np.arange(dst)[:, None]
    r = np.arange(src)[None, :]
    lo = np.maximum(i * src, r * dst)
    hi = np.minimum((i + 1) * src, (r + 1) * dst)
    return np.clip(hi - lo, 0, None).astype(np.float64)


def _box_sums(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    # Integer entries bounded by 255*h*w (< 2**53), so float64 matmul is exact.
    h, w = pixels.shape
    ly = _overlap_matrix(h, out_h)
    lx = _overlap_matrix(w, out_w)
    return ly @ pixels.astype(np.float64) @ lx.T


def box_average(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Area-weighted mean per output cell, before rounding."""
    h, w = pixels.shape
    return _box_sums(pixels, out_h, out_w) / float(h * w)


def resize_box(img: GrayImage, out_h: int, out_w: int) -> GrayImage:
    """Box-resample to (out_h, out_w), rounding half up."""
    if out_h < 1 or out_w < 1:
        raise ValueError("target size must be positive")
    h, w = img.pixels.shape
    sums = _box_sums(img.pixels, out_h, out_w).astype(np.int64)
    area = h * w
    rounded = (2 * sums + area) // (2 * area)
    return GrayImage(rounded.astype(np.uint8))


def resize_to_plane(img: GrayImage) -> np.ndarray:
    """64x64 float64 plane with values in [0, 1]."""
    return resize_box(img, PLANE_SIDE, PLANE_SIDE).pixels.astype(np.float64) / 255.0


def imagize(data: bytes) -> np.ndarray:
    """Bytes straight to the network input plane."""
    return resize_to_plane(bytes_to_image(data))


def image_to_pgm(img: GrayImage) -> bytes:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


_PGM_HEADER = re.compile(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s")


def pgm_to_image(blob: bytes) -> GrayImage:
    m = _PGM_HEADER.match(blob)
    if m is None:
        raise InvalidImage("not a binary PGM (P5) stream")
    width, height, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise InvalidImage(f"unsupported maxval {maxval}")
    payload = blob[m.end():]
    if len(payload) != width * height or width < 1 or height < 1:
        raise InvalidImage(f"payload has {len(payload)} bytes, expected {width * height}")
    return GrayImage(np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy())


def describe_width(n: int) -> str:
    width = width_for_size(n)
    return f"{n} bytes -> width {width}, height {math.ceil(n / width)}"
