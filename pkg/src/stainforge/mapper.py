"""The color mapping network: two 1x1 convolution layers applied pointwise.

Each pixel's RGB vector passes through an 8-channel hidden layer with ReLU
and a 3-channel output layer with tanh:

    y = tanh(w2 @ relu(w1 @ x + b1) + b2)

Because the kernels are 1x1 the mapping touches one pixel at a time, which
guarantees structural consistency of the output image and allows an exact
256^3 lookup-table fast path. The whole mapping is defined by 59 scalars
(24 + 8 + 24 + 3), supplied externally, typically by the per-image
prediction network in :mod:`stainforge.predictor`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import DimensionError, NumericError, PixelImage, decode_u8, encode_u8

__all__ = [
    "HIDDEN_CHANNELS",
    "PARAM_COUNT",
    "MapperParams",
    "ColorLut",
    "map_pixel",
    "map_image",
    "compile_lut",
    "map_image_lut",
    "pack_params",
    "unpack_params",
    "params_to_json",
    "params_from_json",
]

HIDDEN_CHANNELS = 8
# two layers, c hidden channels: (3c + c) + (3c + 3) = 7c + 3 scalars
PARAM_COUNT = 7 * HIDDEN_CHANNELS + 3


@dataclass(frozen=True)
class MapperParams:
    """The 59 scalars of one color mapping (two biased 1x1 conv layers)."""

    w1: np.ndarray  # (8, 3) layer-1 weights
    b1: np.ndarray  # (8,)   layer-1 biases
    w2: np.ndarray  # (3, 8) layer-2 weights
    b2: np.ndarray  # (3,)   layer-2 biases

    def __post_init__(self):
        shapes = {
            "w1": (HIDDEN_CHANNELS, 3),
            "b1": (HIDDEN_CHANNELS,),
            "w2": (3, HIDDEN_CHANNELS),
            "b2": (3,),
        }
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise DimensionError(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"{name} contains non-finite values")
            arr = np.ascontiguousarray(arr)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @staticmethod
    def zeros() -> "MapperParams":
        return unpack_params(np.zeros(PARAM_COUNT))


@dataclass(frozen=True)
class ColorLut:
    """Exact 256^3 table: entry [r, g, b] = encode(map_pixel(decode((r,g,b))))."""

    table: np.ndarray  # (256, 256, 256, 3) uint8
    bits: int = 8

    def __post_init__(self):
        if self.bits != 8 or self.table.shape != (256, 256, 256, 3):
            raise DimensionError(f"LUT must be 256^3 x 3, got shape {self.table.shape}")
        if self.table.dtype != np.uint8:
            raise DimensionError(f"LUT entries must be uint8, got {self.table.dtype}")


def _forward_flat(flat: np.ndarray, params: MapperParams) -> np.ndarray:
    """Apply the mapper to an (N, 3) batch of pixels.

    Only shape-independent elementwise operations with a fixed accumulation
    order, so the result for a given pixel value does not depend on batch
    size or layout. The LUT compiler and the direct path both come through
    here, which is what makes them bit-exact against each other.
    """
    w1, b1, w2, b2 = params.w1, params.b1, params.w2, params.b2
    n = flat.shape[0]
    hidden = np.empty((n, HIDDEN_CHANNELS), dtype=np.float64)
    for c in range(HIDDEN_CHANNELS):
        acc = w1[c, 0] * flat[:, 0]
        acc += w1[c, 1] * flat[:, 1]
        acc += w1[c, 2] * flat[:, 2]
        acc += b1[c]
        hidden[:, c] = acc
    np.maximum(hidden, 0.0, out=hidden)
    out = np.empty((n, 3), dtype=np.float64)
    for c in range(3):
        acc = w2[c, 0] * hidden[:, 0]
        for k in range(1, HIDDEN_CHANNELS):
            acc += w2[c, k] * hidden[:, k]
        acc += b2[c]
        out[:, c] = acc
    return np.tanh(out)


def map_pixel(x, params: MapperParams) -> np.ndarray:
    """Map one RGB vector in [-1, 1]; returns a 3-vector in (-1, 1)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (3,):
        raise DimensionError(f"expected a 3-vector, got shape {x.shape}")
    return _forward_flat(x.reshape(1, 3), params)[0]


def map_image(img: PixelImage, params: MapperParams) -> PixelImage:
    """Map every pixel independently; output size equals input size."""
    h, w = img.height, img.width
    flat = img.data.reshape(-1, 3)
    return PixelImage(_forward_flat(flat, params).reshape(h, w, 3))


def compile_lut(params: MapperParams, _chunk: int = 8) -> ColorLut:
    """Tabulate encode_u8(map_pixel(decode_u8(u))) for every 8-bit RGB triple.

    48 MiB of outputs; compiled in red-axis slabs to bound the float
    intermediates. Exact by construction: slabs go through the same
    decode / map / encode path as a real image.
    """
    grid_g, grid_b = np.meshgrid(
        np.arange(256, dtype=np.uint8), np.arange(256, dtype=np.uint8), indexing="ij"
    )
    gb = np.stack([grid_g.ravel(), grid_b.ravel()], axis=1)
    table = np.empty((256, 256, 256, 3), dtype=np.uint8)
    for r0 in range(0, 256, _chunk):
        n_r = min(_chunk, 256 - r0)
        chunk = np.empty((n_r * 65536, 1, 3), dtype=np.uint8)
        for i in range(n_r):
            chunk[i * 65536 : (i + 1) * 65536, 0, 0] = r0 + i
            chunk[i * 65536 : (i + 1) * 65536, 0, 1:] = gb
        coded = encode_u8(map_image(decode_u8(chunk), params))
        table[r0 : r0 + n_r] = coded.reshape(n_r, 256, 256, 3)
    return ColorLut(table=table)


def map_image_lut(raw: np.ndarray, lut: ColorLut) -> np.ndarray:
    """Map an 8-bit image through the table; bit-equal to the direct path."""
    raw = np.asarray(raw)
    if raw.dtype != np.uint8 or raw.ndim != 3 or raw.shape[2] != 3:
        raise DimensionError(f"expected HxWx3 uint8 image, got {raw.dtype} {raw.shape}")
    return lut.table[raw[..., 0], raw[..., 1], raw[..., 2]]


def pack_params(params: MapperParams) -> np.ndarray:
    """Flatten to the frozen 59-vector order: w1 row-major, b1, w2 row-major, b2."""
    return np.concatenate(
        [params.w1.ravel(), params.b1, params.w2.ravel(), params.b2]
    )


def unpack_params(v) -> MapperParams:
    """Inverse of :func:`pack_params`."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (PARAM_COUNT,):
        raise DimensionError(f"expected a {PARAM_COUNT}-vector, got shape {v.shape}")
    return MapperParams(
        w1=v[0:24].reshape(HIDDEN_CHANNELS, 3),
        b1=v[24:32],
        w2=v[32:56].reshape(3, HIDDEN_CHANNELS),
        b2=v[56:59],
    )


def params_to_json(params: MapperParams) -> str:
    """JSON form with keys w1, b1, w2, b2 as nested lists."""
    return json.dumps(
        {
            "w1": params.w1.tolist(),
            "b1": params.b1.tolist(),
            "w2": params.w2.tolist(),
            "b2": params.b2.tolist(),
        },
        indent=2,
    )


def params_from_json(text: str) -> MapperParams:
    obj = json.loads(text)
    return MapperParams(
        w1=np.asarray(obj["w1"], dtype=np.float64),
        b1=np.asarray(obj["b1"], dtype=np.float64),
        w2=np.asarray(obj["w2"], dtype=np.float64),
        b2=np.asarray(obj["b2"], dtype=np.float64),
    )
