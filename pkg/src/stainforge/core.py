"""Shared image types, 8-bit value conventions, and resampling.

Pixel values live in the signed unit interval [-1, 1] so that the color
mapper's tanh output covers the full 8-bit range. The conversion is
``x = u / 127.5 - 1`` and its inverse rounds half-to-even, which makes the
lookup-table fast path and the direct float path agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "StainforgeError",
    "DimensionError",
    "NumericError",
    "PixelImage",
    "Tile",
    "decode_u8",
    "encode_u8",
    "resize_bilinear",
]


class StainforgeError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(StainforgeError):
    """An array has an unusable shape (empty, wrong rank, size mismatch)."""


class NumericError(StainforgeError):
    """Non-finite values where finite ones are required."""


@dataclass(frozen=True)
class PixelImage:
    """An H x W x 3 RGB image with float64 values in [-1, 1].

    The wrapped array is made read-only; operations return new images.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"expected non-empty HxWx3 array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NumericError("image contains non-finite values")
        if arr.min() < -1.0 or arr.max() > 1.0:
            raise NumericError("image values outside [-1, 1]")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 3


@dataclass(frozen=True)
class Tile:
    """An image region at pixel offset (x0, y0) of its parent."""

    x0: int
    y0: int
    image: PixelImage

    def __post_init__(self):
        if self.x0 < 0 or self.y0 < 0:
            raise DimensionError(f"negative tile offset ({self.x0}, {self.y0})")


def decode_u8(raw: np.ndarray) -> PixelImage:
    """Map an 8-bit H x W x 3 image into [-1, 1] via x = u/127.5 - 1."""
    raw = np.asarray(raw)
    if raw.ndim != 3 or raw.shape[2] != 3 or raw.shape[0] < 1 or raw.shape[1] < 1:
        raise DimensionError(f"expected non-empty HxWx3 u8 array, got shape {raw.shape}")
    return PixelImage(raw.astype(np.float64) / 127.5 - 1.0)


def encode_u8(img: PixelImage) -> np.ndarray:
    """Inverse of :func:`decode_u8`: u = clamp(round((x+1)*127.5), 0, 255).

    Rounding is half-to-even (numpy's rint), part of the bit-exactness
    contract between the direct and LUT mapping paths.
    """
    u = (img.data + 1.0) * 127.5
    return np.clip(np.rint(u), 0.0, 255.0).astype(np.uint8)


def _axis_coords(n_out: int, n_src: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # half-pixel-centered source coordinates, clamped to the valid range
    coords = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_src / n_out) - 0.5
    coords = np.clip(coords, 0.0, n_src - 1.0)
    lo = np.floor(coords).astype(np.intp)
    hi = np.minimum(lo + 1, n_src - 1)
    frac = coords - lo
    return lo, hi, frac


def resize_bilinear(data: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample of an H x W x C float array to out_h x out_w.

    Uses the x0 + f*(x1-x0) form so constant inputs are preserved exactly
    and identity-size resampling returns the input unchanged.
    """
    if out_h < 1 or out_w < 1:
        raise DimensionError(f"output size {out_h}x{out_w} must be positive")
    data = np.asarray(data, dtype=np.float64)
    h, w = data.shape[0], data.shape[1]
    ylo, yhi, fy = _axis_coords(out_h, h)
    xlo, xhi, fx = _axis_coords(out_w, w)

    top = data[ylo][:, xlo]
    top = top + fx[None, :, None] * (data[ylo][:, xhi] - top)
    bot = data[yhi][:, xlo]
    bot = bot + fx[None, :, None] * (data[yhi][:, xhi] - bot)
    return top + fy[:, None, None] * (bot - top)
