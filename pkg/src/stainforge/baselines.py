"""Classical stain normalization baselines: Reinhard and Macenko.

Reinhard matches per-channel mean and standard deviation in the
decorrelated log-LMS "lab" space; Macenko separates hematoxylin and eosin
in optical-density space via the principal plane of the OD point cloud and
rescales per-stain concentrations.

The color-space matrices below are the single numeric source of truth for
the lab transform used throughout this package:

    RGB -> LMS:  [[0.3811, 0.5783, 0.0402],
                  [0.1967, 0.7244, 0.0782],
                  [0.0241, 0.1288, 0.8444]]
    lab  =  diag(1/sqrt(3), 1/sqrt(6), 1/sqrt(2))
            @ [[1, 1, 1], [1, 1, -2], [1, -1, 0]] @ log10(LMS)

with the exact matrix inverses on the way back.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import DimensionError, PixelImage, StainforgeError

__all__ = [
    "DegenerateImageError",
    "RankError",
    "ReinhardStats",
    "StainBasis",
    "reinhard_fit",
    "reinhard_apply",
    "macenko_fit",
    "macenko_apply",
    "rgb_to_lab",
    "lab_to_rgb",
]


class DegenerateImageError(StainforgeError):
    """Image has no usable stained pixels (e.g. all white)."""


class RankError(StainforgeError):
    """Optical-density cloud is collinear; two stains cannot be separated."""


_RGB2LMS = np.array(
    [
        [0.3811, 0.5783, 0.0402],
        [0.1967, 0.7244, 0.0782],
        [0.0241, 0.1288, 0.8444],
    ]
)
_LMS2RGB = np.linalg.inv(_RGB2LMS)
_LOGLMS2LAB = np.diag([1.0 / np.sqrt(3.0), 1.0 / np.sqrt(6.0), 1.0 / np.sqrt(2.0)]) @ np.array(
    [[1.0, 1.0, 1.0], [1.0, 1.0, -2.0], [1.0, -1.0, 0.0]]
)
_LAB2LOGLMS = np.linalg.inv(_LOGLMS2LAB)

_LMS_FLOOR = 1e-6  # keeps log10 finite on black pixels


@dataclass(frozen=True)
class ReinhardStats:
    """Per-channel mean and population standard deviation in lab space."""

    mean: np.ndarray  # (3,)
    std: np.ndarray  # (3,)

    def __post_init__(self):
        for name in ("mean", "std"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=np.float64))
            if arr.shape != (3,):
                raise DimensionError(f"{name} must be a 3-vector, got shape {arr.shape}")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def degenerate(self) -> np.ndarray:
        """Boolean mask of channels with zero spread (blank-tile channels)."""
        return self.std == 0.0

    def to_json(self) -> str:
        return json.dumps({"mean": self.mean.tolist(), "std": self.std.tolist()}, indent=2)

    @staticmethod
    def from_json(text: str) -> "ReinhardStats":
        obj = json.loads(text)
        return ReinhardStats(mean=np.asarray(obj["mean"]), std=np.asarray(obj["std"]))


@dataclass(frozen=True)
class StainBasis:
    """Unit OD stain directions (columns: hematoxylin, eosin) and the
    99th-percentile concentration of each stain."""

    stain_matrix: np.ndarray  # (3, 2)
    max_conc: np.ndarray  # (2,)

    def __post_init__(self):
        m = np.ascontiguousarray(np.asarray(self.stain_matrix, dtype=np.float64))
        c = np.ascontiguousarray(np.asarray(self.max_conc, dtype=np.float64))
        if m.shape != (3, 2):
            raise DimensionError(f"stain_matrix must be 3x2, got shape {m.shape}")
        if c.shape != (2,):
            raise DimensionError(f"max_conc must be a 2-vector, got shape {c.shape}")
        if np.any(c <= 0.0):
            raise DegenerateImageError(f"max_conc must be positive, got {c}")
        m.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "stain_matrix", m)
        object.__setattr__(self, "max_conc", c)

    def to_json(self) -> str:
        return json.dumps(
            {"stain_matrix": self.stain_matrix.tolist(), "max_conc": self.max_conc.tolist()},
            indent=2,
        )

    @staticmethod
    def from_json(text: str) -> "StainBasis":
        obj = json.loads(text)
        return StainBasis(
            stain_matrix=np.asarray(obj["stain_matrix"]), max_conc=np.asarray(obj["max_conc"])
        )


def rgb_to_lab(data: np.ndarray) -> np.ndarray:
    """Pixel data in [-1, 1] to the decorrelated log-LMS lab space."""
    rgb01 = (np.asarray(data, dtype=np.float64) + 1.0) / 2.0
    lms = rgb01 @ _RGB2LMS.T
    np.maximum(lms, _LMS_FLOOR, out=lms)
    return np.log10(lms) @ _LOGLMS2LAB.T


def lab_to_rgb(lab: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rgb_to_lab`, clamped back into [-1, 1]."""
    lms = np.power(10.0, lab @ _LAB2LOGLMS.T)
    rgb01 = lms @ _LMS2RGB.T
    return np.clip(rgb01 * 2.0 - 1.0, -1.0, 1.0)


_STD_SNAP = 1e-12  # lab units; accumulation noise on constant tiles


def reinhard_fit(img: PixelImage) -> ReinhardStats:
    """Per-channel lab mean and population std (divisor N).

    Spreads below float accumulation noise are reported as exactly 0 so
    blank tiles are reliably flagged degenerate.
    """
    lab = rgb_to_lab(img.data).reshape(-1, 3)
    std = lab.std(axis=0)
    std[std <= _STD_SNAP] = 0.0
    return ReinhardStats(mean=lab.mean(axis=0), std=std)


def reinhard_apply(img: PixelImage, src: ReinhardStats, tgt: ReinhardStats) -> PixelImage:
    """Affine-match lab statistics: x' = (x - src.mean) * tgt.std/src.std + tgt.mean.

    Channels where the source spread is zero keep scale 1 (blank tiles
    would otherwise divide by zero); the shift still applies.
    """
    scale = np.where(src.degenerate, 1.0, tgt.std / np.where(src.degenerate, 1.0, src.std))
    lab = rgb_to_lab(img.data)
    lab = (lab - src.mean) * scale + tgt.mean
    return PixelImage(lab_to_rgb(lab))


def _to_od(data: np.ndarray, io: float) -> np.ndarray:
    # OD = -log10((u + 1) / io) on the continuous 8-bit scale
    u = (np.asarray(data, dtype=np.float64) + 1.0) * 127.5
    return -np.log10((u + 1.0) / io)


def _from_od(od: np.ndarray, io: float) -> np.ndarray:
    u = io * np.power(10.0, -od) - 1.0
    return np.clip(u / 127.5 - 1.0, -1.0, 1.0)


def macenko_fit(
    img: PixelImage,
    beta: float = 0.15,
    alpha_pct: float = 1.0,
    io: float = 255.0,
) -> StainBasis:
    """Estimate the two-stain OD basis of an H&E image.

    Pixels with any OD component below ``beta`` are treated as background
    and excluded from the direction estimate. The two stain vectors are the
    ``alpha_pct`` / ``100 - alpha_pct`` percentile directions of the OD
    cloud projected on its principal plane; hematoxylin is the column with
    the larger blue component. Concentration percentiles use every pixel.
    """
    od = _to_od(img.data, io).reshape(-1, 3)
    stained = od[np.all(od >= beta, axis=1)]
    if stained.shape[0] < 2:
        raise DegenerateImageError(
            f"only {stained.shape[0]} pixels above OD threshold {beta}; cannot fit stains"
        )

    centered = stained - stained.mean(axis=0)
    cov = centered.T @ centered / stained.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals[1] <= 1e-10 * max(eigvals[2], 1e-30):
        raise RankError("optical-density cloud is collinear; need two stain directions")
    plane = eigvecs[:, [2, 1]]  # top-2 principal directions

    proj = stained @ plane
    phi = np.arctan2(proj[:, 1], proj[:, 0])
    phi_lo = np.percentile(phi, alpha_pct)
    phi_hi = np.percentile(phi, 100.0 - alpha_pct)
    v_lo = plane @ np.array([np.cos(phi_lo), np.sin(phi_lo)])
    v_hi = plane @ np.array([np.cos(phi_hi), np.sin(phi_hi)])

    def fix_sign(v: np.ndarray) -> np.ndarray:
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        v = np.maximum(v, 0.0)  # stain absorbances cannot be negative
        return v / np.linalg.norm(v)

    v_lo, v_hi = fix_sign(v_lo), fix_sign(v_hi)
    # hematoxylin absorbs more blue
    if v_lo[2] >= v_hi[2]:
        matrix = np.column_stack([v_lo, v_hi])
    else:
        matrix = np.column_stack([v_hi, v_lo])

    conc = np.linalg.lstsq(matrix, od.T, rcond=None)[0]
    max_conc = np.percentile(conc, 99.0, axis=1)
    if np.any(max_conc <= 0.0):
        raise DegenerateImageError(f"non-positive stain concentration percentile {max_conc}")
    return StainBasis(stain_matrix=matrix, max_conc=max_conc)


def macenko_apply(
    img: PixelImage, src: StainBasis, tgt: StainBasis, io: float = 255.0
) -> PixelImage:
    """Move an image onto the target stain basis.

    Source concentrations are fitted by least squares, rescaled per stain
    by the ratio of 99th-percentile concentrations, and recombined with the
    target stain matrix.
    """
    h, w = img.height, img.width
    od = _to_od(img.data, io).reshape(-1, 3)
    conc = np.linalg.lstsq(src.stain_matrix, od.T, rcond=None)[0]
    conc *= (tgt.max_conc / src.max_conc)[:, None]
    od_out = (tgt.stain_matrix @ conc).T
    return PixelImage(_from_od(od_out, io).reshape(h, w, 3))
