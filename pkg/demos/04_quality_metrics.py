"""Similarity metrics: SSIM, quaternion SSIM, PSNR.

Target similarity is scored on raw RGB (QSSIM, SSIM, PSNR); preservation
of the source is scored with grayscale SSIM. The quaternion variant
couples the three channels through a pure-quaternion embedding, so it
penalizes hue rotations that channel-averaged SSIM can miss.
"""

import numpy as np

from stainforge import evaluate_set, psnr, qssim, ssim

rng = np.random.default_rng(5)
target = rng.integers(30, 220, (64, 64, 3)).astype(np.uint8)

# a "good" normalization: small noise around the target
good = np.clip(target.astype(int) + rng.integers(-6, 7, target.shape), 0, 255).astype(np.uint8)
# a hue-swapped impostor: same structure, channels rotated
swapped = target[..., [1, 2, 0]]

print("pair            SSIM     QSSIM    PSNR(dB)")
for name, img in (("good", good), ("channel-swap", swapped)):
    print(f"{name:14s} {ssim(img, target):8.4f} {qssim(img, target):8.4f} "
          f"{psnr(img, target):8.2f}")

# set-level report, like an evaluation table row: mean +- std
sources = [target, target]
normalized = [good, swapped]
targets = [target, target]
report = evaluate_set(normalized, targets, sources)
print("\nset summary (mean, sample std):")
for metric, (mean, std) in report.summary().items():
    print(f"  {metric:13s} {mean:8.4f} +- {std:.4f}")
