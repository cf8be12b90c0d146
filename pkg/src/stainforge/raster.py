"""8-bit RGB raster I/O for PNG and PPM (P6) files."""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

from .core import DimensionError, StainforgeError

__all__ = ["RasterError", "read_image_u8", "write_image_u8", "IMAGE_EXTENSIONS"]

IMAGE_EXTENSIONS = (".png", ".ppm")


class RasterError(StainforgeError):
    """File could not be read or written as an 8-bit RGB raster."""


def read_image_u8(path: str | os.PathLike) -> np.ndarray:
    """Read a PNG or PPM file as an H x W x 3 uint8 array."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise RasterError(f"cannot read {path}: {exc}") from exc
    return arr


def write_image_u8(path: str | os.PathLike, arr: np.ndarray) -> None:
    """Write an H x W x 3 uint8 array; format chosen by file extension."""
    arr = np.asarray(arr)
    if arr.dtype != np.uint8 or arr.ndim != 3 or arr.shape[2] != 3:
        raise DimensionError(f"expected HxWx3 uint8 array, got {arr.dtype} {arr.shape}")
    ext = os.path.splitext(os.fspath(path))[1].lower()
    if ext not in IMAGE_EXTENSIONS:
        raise RasterError(f"unsupported raster extension {ext!r} (use .png or .ppm)")
    try:
        Image.fromarray(arr, mode="RGB").save(path)
    except OSError as exc:
        raise RasterError(f"cannot write {path}: {exc}") from exc
