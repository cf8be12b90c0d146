"""Parameter prediction network: a modified ResNet18 forward pass.

The network sees a 128x128 bilinear downsample of the input and emits the
59 scalars of the color mapper. Modifications relative to stock ResNet18:
every normalization layer is removed and every convolution (including the
stage-transition shortcuts) carries a bias. The raw head output is squashed
by tanh and scaled by a learnable bound "alpha" (initially 4.5), so every
emitted parameter lies in [-alpha, alpha].

Inference only; weights come from a PNWT file (see
:mod:`stainforge.weights`) or the seeded initializer below.
"""

from __future__ import annotations

import numpy as np

from .core import PixelImage, StainforgeError, resize_bilinear
from .mapper import PARAM_COUNT, MapperParams, map_image, unpack_params
from .weights import WeightStore

__all__ = [
    "INPUT_SIZE",
    "DEFAULT_ALPHA",
    "WeightsError",
    "MissingTensorError",
    "ShapeMismatchError",
    "expected_tensors",
    "init_weights",
    "downsample_128",
    "predict_params",
    "normalize_one",
]

INPUT_SIZE = 128
DEFAULT_ALPHA = 4.5

_STAGE_WIDTHS = (64, 128, 256, 512)
_BLOCKS_PER_STAGE = 2


class WeightsError(StainforgeError):
    """The weight store cannot drive this architecture."""


class MissingTensorError(WeightsError):
    """The weight store lacks a tensor the architecture requires."""


class ShapeMismatchError(WeightsError):
    """A stored tensor's shape does not match the architecture."""


def expected_tensors() -> dict[str, tuple[int, ...]]:
    """Tensor name -> shape for the full architecture, plus "alpha".

    Naming scheme: "stem.conv.weight", "stage3.block0.conv2.bias",
    "stage2.block0.shortcut.weight", "head.fc.weight", "alpha".
    """
    spec: dict[str, tuple[int, ...]] = {
        "stem.conv.weight": (64, 3, 7, 7),
        "stem.conv.bias": (64,),
    }
    in_ch = 64
    for s, width in enumerate(_STAGE_WIDTHS, start=1):
        for b in range(_BLOCKS_PER_STAGE):
            prefix = f"stage{s}.block{b}"
            first_in = in_ch if b == 0 else width
            spec[f"{prefix}.conv1.weight"] = (width, first_in, 3, 3)
            spec[f"{prefix}.conv1.bias"] = (width,)
            spec[f"{prefix}.conv2.weight"] = (width, width, 3, 3)
            spec[f"{prefix}.conv2.bias"] = (width,)
            if b == 0 and first_in != width:
                spec[f"{prefix}.shortcut.weight"] = (width, first_in, 1, 1)
                spec[f"{prefix}.shortcut.bias"] = (width,)
        in_ch = width
    spec["head.fc.weight"] = (PARAM_COUNT, 512)
    spec["head.fc.bias"] = (PARAM_COUNT,)
    spec["alpha"] = (1,)
    return spec


def init_weights(seed: int, alpha: float = DEFAULT_ALPHA) -> WeightStore:
    """Deterministic fixture weights: uniform in [-k, k], k = 1/sqrt(fan_in)."""
    rng = np.random.default_rng(seed)
    spec = expected_tensors()
    store = WeightStore()
    for name, shape in spec.items():
        if name == "alpha":
            store.add("alpha", np.array([alpha], dtype=np.float32))
            continue
        # bias shares its conv/fc fan_in
        w_shape = spec[name[: -len(".bias")] + ".weight"] if name.endswith(".bias") else shape
        k = 1.0 / np.sqrt(float(np.prod(w_shape[1:])))
        store.add(name, rng.uniform(-k, k, size=shape))
    return store


def _validate(weights: WeightStore) -> float:
    expected = expected_tensors()
    for name, shape in expected.items():
        if name not in weights:
            raise MissingTensorError(f"weights file lacks tensor {name!r}")
        got = weights.get(name).shape
        if got != shape:
            raise ShapeMismatchError(f"tensor {name!r} has shape {got}, expected {shape}")
    alpha = float(weights.get("alpha")[0])
    if not np.isfinite(alpha) or alpha <= 0.0:
        raise WeightsError(f"alpha must be finite and > 0, got {alpha}")
    return alpha


def _conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int, pad: int) -> np.ndarray:
    """Biased 2-D convolution on a (C, H, W) map via im2col + matmul."""
    c_out, c_in, kh, kw = w.shape
    _, h, wd = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(1, 2))
    windows = windows[:, ::stride, ::stride]  # (C_in, oh, ow, kh, kw)
    cols = windows.transpose(1, 2, 0, 3, 4).reshape(oh * ow, c_in * kh * kw)
    out = cols @ w.reshape(c_out, -1).T + b
    return out.T.reshape(c_out, oh, ow)


def _maxpool_3x3_s2(x: np.ndarray) -> np.ndarray:
    c, h, w = x.shape
    x = np.pad(x, ((0, 0), (1, 1), (1, 1)), constant_values=-np.inf)
    windows = np.lib.stride_tricks.sliding_window_view(x, (3, 3), axis=(1, 2))
    return windows[:, ::2, ::2].max(axis=(3, 4))


def _forward_features(x: np.ndarray, weights: WeightStore) -> np.ndarray:
    """Input (3, 128, 128) float64 in [-1, 1]; returns the raw 59-vector."""
    w = lambda name: weights.get(name).astype(np.float64)

    x = _conv2d(x, w("stem.conv.weight"), w("stem.conv.bias"), stride=2, pad=3)
    np.maximum(x, 0.0, out=x)
    x = _maxpool_3x3_s2(x)

    in_ch = 64
    for s, width in enumerate(_STAGE_WIDTHS, start=1):
        for blk in range(_BLOCKS_PER_STAGE):
            prefix = f"stage{s}.block{blk}"
            transition = blk == 0 and in_ch != width
            stride = 2 if transition else 1
            identity = x
            y = _conv2d(x, w(f"{prefix}.conv1.weight"), w(f"{prefix}.conv1.bias"), stride, 1)
            np.maximum(y, 0.0, out=y)
            y = _conv2d(y, w(f"{prefix}.conv2.weight"), w(f"{prefix}.conv2.bias"), 1, 1)
            if transition:
                identity = _conv2d(
                    x, w(f"{prefix}.shortcut.weight"), w(f"{prefix}.shortcut.bias"), 2, 0
                )
            y += identity
            np.maximum(y, 0.0, out=y)
            x = y
        in_ch = width

    pooled = x.mean(axis=(1, 2))
    return w("head.fc.weight") @ pooled + w("head.fc.bias")


def downsample_128(img: PixelImage) -> PixelImage:
    """Bilinear resample to the fixed 128x128 prediction resolution."""
    if img.height == INPUT_SIZE and img.width == INPUT_SIZE:
        return img
    return PixelImage(resize_bilinear(img.data, INPUT_SIZE, INPUT_SIZE))


def predict_params(img: PixelImage, weights: WeightStore) -> MapperParams:
    """Run the prediction network; every output scalar is in [-alpha, alpha]."""
    alpha = _validate(weights)
    small = downsample_128(img)
    raw = _forward_features(small.data.transpose(2, 0, 1), weights)
    return unpack_params(alpha * np.tanh(raw))


def normalize_one(img: PixelImage, weights: WeightStore) -> PixelImage:
    """Predict parameters for this image, then map it at full resolution."""
    return map_image(img, predict_params(img, weights))
