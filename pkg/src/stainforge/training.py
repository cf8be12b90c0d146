"""Training machinery: the four framework losses, the random-scale
augmentation, the Adam optimizer and its warmup/decay schedule, and a
supervised trainer that fits mapper parameters to paired pixel data with
analytic gradients.

The losses are pure functions of their tensors; assembling them into the
full adversarial loop (discriminators, texture modules) is out of scope
here. The adversarial loss follows the least-squares convention with the
label assignment written exactly as real -> 0, fake -> 1.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import DimensionError, NumericError, PixelImage, resize_bilinear
from .mapper import PARAM_COUNT, MapperParams, unpack_params

__all__ = [
    "adv_loss",
    "cycle_loss",
    "domain_loss",
    "identity_loss",
    "random_scale",
    "LrSchedule",
    "lr_at",
    "AdamState",
    "adam_step",
    "mapper_grads",
    "mapper_loss",
    "fit_mapper",
]


def _mae(a: PixelImage, b: PixelImage) -> float:
    if a.data.shape != b.data.shape:
        raise DimensionError(f"image shapes differ: {a.data.shape} vs {b.data.shape}")
    return float(np.mean(np.abs(a.data - b.data)))


def adv_loss(real_scores: np.ndarray, fake_scores: np.ndarray) -> float:
    """Least-squares adversarial loss: mean(real^2) + mean((1 - fake)^2).

    Zero exactly when every real score is 0 and every fake score is 1.
    """
    real = np.asarray(real_scores, dtype=np.float64)
    fake = np.asarray(fake_scores, dtype=np.float64)
    if real.size == 0 or fake.size == 0:
        raise DimensionError("score maps must be non-empty")
    if not (np.all(np.isfinite(real)) and np.all(np.isfinite(fake))):
        raise NumericError("score maps contain non-finite values")
    return float(np.mean(real**2) + np.mean((1.0 - fake) ** 2))


def cycle_loss(s: PixelImage, s_rec: PixelImage, t: PixelImage, t_rec: PixelImage) -> float:
    """Reconstruction consistency: MAE(s, s_rec) + MAE(t, t_rec)."""
    return _mae(s, s_rec) + _mae(t, t_rec)


def domain_loss(
    g_out_a: PixelImage,
    t_out_a: PixelImage,
    g_out_b: PixelImage,
    t_out_b: PixelImage,
) -> float:
    """Keeps each texture module close to its generator output, both directions."""
    return _mae(g_out_a, t_out_a) + _mae(g_out_b, t_out_b)


def identity_loss(
    s: PixelImage,
    g_b_s: PixelImage,
    t_b_s: PixelImage,
    t: PixelImage,
    g_a_t: PixelImage,
    t_a_t: PixelImage,
) -> float:
    """Generators and texture modules must leave in-domain images unchanged.

    Sum of four MAE terms: generator and texture module, each fed its own
    domain's image.
    """
    return _mae(s, g_b_s) + _mae(t, g_a_t) + _mae(s, t_b_s) + _mae(t, t_a_t)


def random_scale(img: PixelImage, rng_seed: int) -> PixelImage:
    """Resize by a factor drawn uniformly from [0.5, 1.0] (seeded, bilinear)."""
    if img.height < 2 or img.width < 2:
        raise DimensionError(f"image too small to rescale: {img.height}x{img.width}")
    factor = np.random.default_rng(rng_seed).uniform(0.5, 1.0)
    if factor == 1.0:
        return img
    out_h = max(1, int(round(factor * img.height)))
    out_w = max(1, int(round(factor * img.width)))
    return PixelImage(resize_bilinear(img.data, out_h, out_w))


@dataclass(frozen=True)
class LrSchedule:
    """Linear warmup to the peak over the first iterations, then linear decay to 0."""

    total_iters: int
    peak: float = 2e-4
    warmup_iters: int = 1000

    def __post_init__(self):
        if self.warmup_iters >= self.total_iters:
            raise DimensionError(
                f"warmup ({self.warmup_iters}) must be shorter than training "
                f"({self.total_iters})"
            )
        if self.peak <= 0 or self.warmup_iters <= 0:
            raise DimensionError("peak and warmup_iters must be positive")


def lr_at(sched: LrSchedule, iteration: int) -> float:
    """Learning rate at an iteration: 0 at 0, peak at warmup end, 0 at total."""
    if iteration < 0 or iteration > sched.total_iters:
        raise DimensionError(
            f"iteration {iteration} outside [0, {sched.total_iters}]"
        )
    if iteration <= sched.warmup_iters:
        return sched.peak * iteration / sched.warmup_iters
    return sched.peak * (sched.total_iters - iteration) / (sched.total_iters - sched.warmup_iters)


@dataclass(frozen=True)
class AdamState:
    """Adam moment estimates; functional, one state per parameter vector."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @staticmethod
    def zeros(n: int = PARAM_COUNT) -> "AdamState":
        return AdamState(m=np.zeros(n), v=np.zeros(n))


def adam_step(
    params: np.ndarray, grads: np.ndarray, state: AdamState, lr: float
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; returns new params and new state."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise DimensionError(
            f"shape mismatch: params {params.shape}, grads {grads.shape}, state {state.m.shape}"
        )
    if not np.all(np.isfinite(grads)):
        raise NumericError("gradients contain non-finite values")
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads**2
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, replace(state, m=m, v=v, step=t)


def _mapper_forward(params: MapperParams, x: np.ndarray):
    z1 = x @ params.w1.T + params.b1
    h = np.maximum(z1, 0.0)
    y = np.tanh(h @ params.w2.T + params.b2)
    return y, z1, h


def mapper_loss(params: MapperParams, x: np.ndarray, target: np.ndarray) -> float:
    """Mean squared error of the mapper over a pixel batch (all components)."""
    y, _, _ = _mapper_forward(params, np.asarray(x, dtype=np.float64))
    return float(np.mean((y - np.asarray(target, dtype=np.float64)) ** 2))


def mapper_grads(params: MapperParams, x: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Analytic gradient of :func:`mapper_loss` as a packed 59-vector.

    Exact chain rule through tanh / affine / relu / affine; the relu
    subgradient at 0 is taken as 0.
    """
    x = np.asarray(x, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != 3 or x.shape != target.shape or x.shape[0] == 0:
        raise DimensionError(
            f"expected matching non-empty (N, 3) batches, got {x.shape} and {target.shape}"
        )
    y, z1, h = _mapper_forward(params, x)
    n = x.shape[0]
    d_y = 2.0 * (y - target) / (n * 3)
    d_z2 = d_y * (1.0 - y * y)  # tanh'
    d_w2 = d_z2.T @ h
    d_b2 = d_z2.sum(axis=0)
    d_h = d_z2 @ params.w2
    d_z1 = d_h * (z1 > 0.0)
    d_w1 = d_z1.T @ x
    d_b1 = d_z1.sum(axis=0)
    return np.concatenate([d_w1.ravel(), d_b1, d_w2.ravel(), d_b2])


def fit_mapper(
    source_px: np.ndarray,
    target_px: np.ndarray,
    sched: LrSchedule,
    seed: int = 0,
    batch_size: int = 4096,
    curve_every: int = 100,
) -> tuple[MapperParams, list[tuple[int, float, float]]]:
    """Fit mapper parameters to paired pixels by minibatch Adam.

    Initialization is uniform in [-0.5, 0.5] from the seed; batches are
    drawn from the same generator, so the whole trajectory is reproducible.
    Returns the final parameters and a (iteration, lr, batch mse) curve
    sampled every ``curve_every`` iterations, starting at iteration 0.
    """
    source_px = np.asarray(source_px, dtype=np.float64)
    target_px = np.asarray(target_px, dtype=np.float64)
    if source_px.ndim != 2 or source_px.shape[1] != 3 or source_px.shape != target_px.shape:
        raise DimensionError(
            f"expected matching (N, 3) pixel arrays, got {source_px.shape} and {target_px.shape}"
        )
    n = source_px.shape[0]
    if n < 100:
        raise DimensionError(f"need at least 100 pixel pairs, got {n}")

    rng = np.random.default_rng(seed)
    vec = rng.uniform(-0.5, 0.5, size=PARAM_COUNT)
    state = AdamState.zeros()
    params = unpack_params(vec)
    curve = [(0, lr_at(sched, 0), mapper_loss(params, source_px[:batch_size], target_px[:batch_size]))]
    for it in range(1, sched.total_iters + 1):
        idx = rng.integers(0, n, size=min(batch_size, n))
        params = unpack_params(vec)
        grads = mapper_grads(params, source_px[idx], target_px[idx])
        lr = lr_at(sched, it)
        vec, state = adam_step(vec, grads, state, lr)
        if it % curve_every == 0:
            params = unpack_params(vec)
            curve.append((it, lr, mapper_loss(params, source_px[idx], target_px[idx])))
    return unpack_params(vec), curve
