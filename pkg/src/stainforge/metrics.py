"""Image similarity metrics: SSIM, quaternion SSIM, and PSNR.

All metrics consume 8-bit RGB arrays. SSIM uses the conventional 11x11
Gaussian window (sigma 1.5), valid-window borders, and constants
C1 = (0.01*255)^2, C2 = (0.03*255)^2. RGB SSIM averages the three channel
maps; grayscale SSIM converts by luma first (how source-preservation is
scored). QSSIM embeds each pixel as the pure quaternion r*i + g*j + b*k;
its constants carry a factor 3 because the dynamic range of a pure
quaternion pixel is 255*sqrt(3), which makes QSSIM collapse exactly to
grayscale SSIM on r=g=b images. The cross term uses the magnitude of the
mean quaternion product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from .core import DimensionError

__all__ = [
    "WINDOW_SIZE",
    "WINDOW_SIGMA",
    "C1",
    "C2",
    "ssim",
    "qssim",
    "psnr",
    "MetricReport",
    "evaluate_set",
    "luma",
]

WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5
C1 = (0.01 * 255.0) ** 2
C2 = (0.03 * 255.0) ** 2
_RADIUS = WINDOW_SIZE // 2

_offsets = np.arange(WINDOW_SIZE) - _RADIUS
_KERNEL_1D = np.exp(-(_offsets**2) / (2.0 * WINDOW_SIGMA**2))
_KERNEL_1D /= _KERNEL_1D.sum()


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 3 or a.shape[2] != 3:
        raise DimensionError(f"expected HxWx3 images, got shape {a.shape}")
    if a.shape[0] < WINDOW_SIZE or a.shape[1] < WINDOW_SIZE:
        raise DimensionError(
            f"images must be at least {WINDOW_SIZE}x{WINDOW_SIZE}, got {a.shape[:2]}"
        )
    return a.astype(np.float64), b.astype(np.float64)


def _wmean(plane: np.ndarray) -> np.ndarray:
    """Gaussian-weighted local mean, valid windows only."""
    out = correlate1d(plane, _KERNEL_1D, axis=0, mode="constant")
    out = correlate1d(out, _KERNEL_1D, axis=1, mode="constant")
    return out[_RADIUS:-_RADIUS, _RADIUS:-_RADIUS]


def luma(rgb: np.ndarray) -> np.ndarray:
    """ITU-R 601 luma: 0.299 R + 0.587 G + 0.114 B."""
    rgb = np.asarray(rgb, dtype=np.float64)
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def _ssim_map(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    mu_x = _wmean(x)
    mu_y = _wmean(y)
    var_x = _wmean(x * x) - mu_x * mu_x
    var_y = _wmean(y * y) - mu_y * mu_y
    cov = _wmean(x * y) - mu_x * mu_y
    return ((2.0 * mu_x * mu_y + C1) * (2.0 * cov + C2)) / (
        (mu_x * mu_x + mu_y * mu_y + C1) * (var_x + var_y + C2)
    )


def ssim(a: np.ndarray, b: np.ndarray, grayscale: bool = False) -> float:
    """Mean structural similarity between two u8 RGB images."""
    a, b = _check_pair(a, b)
    if grayscale:
        return float(np.mean(_ssim_map(luma(a), luma(b))))
    maps = [_ssim_map(a[..., c], b[..., c]) for c in range(3)]
    return float(np.mean((maps[0] + maps[1] + maps[2]) / 3.0))


def qssim(a: np.ndarray, b: np.ndarray) -> float:
    """Quaternion SSIM: color-coupled structural similarity.

    Window statistics of the pure-quaternion embedding q = r i + g j + b k:
    mu is the mean quaternion, sigma^2 the mean |q - mu|^2, and the cross
    term is |mean((q_a - mu_a) * conj(q_b - mu_b))|, whose real part is the
    channel-wise covariance sum and whose imaginary part is the mean cross
    product of the centered color vectors.
    """
    a, b = _check_pair(a, b)
    c1, c2 = 3.0 * C1, 3.0 * C2  # dynamic range 255*sqrt(3) for pure quaternions

    mu_a = np.stack([_wmean(a[..., c]) for c in range(3)], axis=-1)
    mu_b = np.stack([_wmean(b[..., c]) for c in range(3)], axis=-1)
    norm_mu_a = np.sqrt(np.sum(mu_a * mu_a, axis=-1))
    norm_mu_b = np.sqrt(np.sum(mu_b * mu_b, axis=-1))

    # second moments; sigma^2 = sum_c var_c, all Gaussian-window weighted
    var_a = sum(_wmean(a[..., c] * a[..., c]) - mu_a[..., c] ** 2 for c in range(3))
    var_b = sum(_wmean(b[..., c] * b[..., c]) - mu_b[..., c] ** 2 for c in range(3))

    def xcov(i: int, j: int) -> np.ndarray:
        return _wmean(a[..., i] * b[..., j]) - mu_a[..., i] * mu_b[..., j]

    real = xcov(0, 0) + xcov(1, 1) + xcov(2, 2)
    cross_i = xcov(1, 2) - xcov(2, 1)
    cross_j = xcov(2, 0) - xcov(0, 2)
    cross_k = xcov(0, 1) - xcov(1, 0)
    sigma_ab = np.sqrt(real**2 + cross_i**2 + cross_j**2 + cross_k**2)

    qmap = ((2.0 * norm_mu_a * norm_mu_b + c1) * (2.0 * sigma_ab + c2)) / (
        (norm_mu_a**2 + norm_mu_b**2 + c1) * (var_a + var_b + c2)
    )
    return float(np.mean(qmap))


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB with MAX = 255; inf on identical images."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"image shapes differ: {a.shape} vs {b.shape}")
    mse = np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


@dataclass
class MetricReport:
    """Per-image metric values and their mean +- sample std over a set."""

    qssim_target: list[float] = field(default_factory=list)
    ssim_target: list[float] = field(default_factory=list)
    psnr_target: list[float] = field(default_factory=list)
    ssim_source: list[float] = field(default_factory=list)

    _COLUMNS = ("qssim_target", "ssim_target", "psnr_target", "ssim_source")

    def __len__(self) -> int:
        return len(self.qssim_target)

    def summary(self) -> dict[str, tuple[float, float]]:
        """Metric name -> (mean, sample std); std is 0 for a single image.

        Infinite per-image PSNR propagates to an infinite mean; the spread
        is then reported as nan rather than tripping inf - inf.
        """
        out = {}
        for name in self._COLUMNS:
            values = np.asarray(getattr(self, name), dtype=np.float64)
            mean = float(values.mean())
            if np.isinf(values).any():
                std = math.nan
            elif len(values) > 1:
                std = float(values.std(ddof=1))
            else:
                std = 0.0
            out[name] = (mean, std)
        return out

    def to_json(self) -> dict:
        per_image = [
            {name: getattr(self, name)[i] for name in self._COLUMNS} for i in range(len(self))
        ]
        return {
            "per_image": per_image,
            "summary": {k: {"mean": m, "std": s} for k, (m, s) in self.summary().items()},
        }


def evaluate_set(
    normalized: list[np.ndarray],
    targets: list[np.ndarray],
    sources: list[np.ndarray],
) -> MetricReport:
    """Score a set: QSSIM/SSIM/PSNR against targets, grayscale SSIM against sources."""
    if not (len(normalized) == len(targets) == len(sources)):
        raise DimensionError(
            f"list lengths differ: {len(normalized)}, {len(targets)}, {len(sources)}"
        )
    if not normalized:
        raise DimensionError("empty image set")
    report = MetricReport()
    for out, tgt, src in zip(normalized, targets, sources):
        report.qssim_target.append(qssim(out, tgt))
        report.ssim_target.append(ssim(out, tgt))
        report.psnr_target.append(psnr(out, tgt))
        report.ssim_source.append(ssim(out, src, grayscale=True))
    return report
