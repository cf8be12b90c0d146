import math

import numpy as np
import pytest

from stainforge import DimensionError, evaluate_set, psnr, qssim, ssim
from stainforge.metrics import C1, C2, MetricReport, luma
from tests.conftest import random_u8


def gaussian_window():
    offsets = np.arange(11) - 5
    k1 = np.exp(-(offsets**2) / (2.0 * 1.5**2))
    k1 /= k1.sum()
    return np.outer(k1, k1)


def naive_ssim_gray(x, y):
    """Per-window double-loop SSIM on one channel, valid borders."""
    w = gaussian_window()
    x = x.astype(np.float64)
    y = y.astype(np.float64)
    h, wd = x.shape
    values = []
    for i in range(h - 10):
        for j in range(wd - 10):
            wx = x[i : i + 11, j : j + 11]
            wy = y[i : i + 11, j : j + 11]
            mx = (w * wx).sum()
            my = (w * wy).sum()
            vx = (w * wx * wx).sum() - mx * mx
            vy = (w * wy * wy).sum() - my * my
            cov = (w * wx * wy).sum() - mx * my
            values.append(
                ((2 * mx * my + C1) * (2 * cov + C2))
                / ((mx * mx + my * my + C1) * (vx + vy + C2))
            )
    return float(np.mean(values))


def naive_ssim(a, b, grayscale=False):
    if grayscale:
        return naive_ssim_gray(luma(a), luma(b))
    return float(np.mean([naive_ssim_gray(a[..., c], b[..., c]) for c in range(3)]))


def quat_mul(p, q):
    """Hamilton product of quaternions as (w, x, y, z) arrays."""
    w1, x1, y1, z1 = p
    w2, x2, y2, z2 = q
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def naive_qssim(a, b):
    """Double-loop QSSIM via explicit quaternion algebra."""
    w = gaussian_window()
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    c1, c2 = 3.0 * C1, 3.0 * C2
    h, wd = a.shape[:2]
    values = []
    for i in range(h - 10):
        for j in range(wd - 10):
            wa = a[i : i + 11, j : j + 11].reshape(-1, 3)
            wb = b[i : i + 11, j : j + 11].reshape(-1, 3)
            wt = w.reshape(-1)
            mu_a = (wt[:, None] * wa).sum(axis=0)
            mu_b = (wt[:, None] * wb).sum(axis=0)
            da = wa - mu_a
            db = wb - mu_b
            var_a = (wt * (da * da).sum(axis=1)).sum()
            var_b = (wt * (db * db).sum(axis=1)).sum()
            # pure quaternions (0, v); conj(q) = (0, -v)
            prod = np.zeros(4)
            for k in range(wa.shape[0]):
                qa = np.concatenate([[0.0], da[k]])
                qb_conj = np.concatenate([[0.0], -db[k]])
                prod += wt[k] * quat_mul(qa, qb_conj)
            sigma_ab = float(np.sqrt((prod**2).sum()))
            na = float(np.sqrt((mu_a**2).sum()))
            nb = float(np.sqrt((mu_b**2).sum()))
            values.append(
                ((2 * na * nb + c1) * (2 * sigma_ab + c2))
                / ((na * na + nb * nb + c1) * (var_a + var_b + c2))
            )
    return float(np.mean(values))


class TestSsim:
    def test_self_similarity_exactly_one(self, rng):
        img = random_u8(rng, 24, 24)
        assert ssim(img, img) == 1.0
        assert ssim(img, img, grayscale=True) == 1.0

    def test_uniform_offset_below_one_matches_oracle(self, rng):
        a = np.full((20, 20, 3), 100, dtype=np.uint8)
        b = np.full((20, 20, 3), 110, dtype=np.uint8)
        got = ssim(a, b)
        assert got < 1.0
        assert got == pytest.approx(naive_ssim(a, b), abs=1e-6)

    def test_random_pairs_match_oracle(self, rng):
        for _ in range(3):
            a, b = random_u8(rng), random_u8(rng)
            assert ssim(a, b) == pytest.approx(naive_ssim(a, b), abs=1e-6)
            assert ssim(a, b, grayscale=True) == pytest.approx(
                naive_ssim(a, b, grayscale=True), abs=1e-6
            )

    def test_symmetry(self, rng):
        a, b = random_u8(rng), random_u8(rng)
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            ssim(random_u8(rng, 16, 16), random_u8(rng, 16, 17))


class TestQssim:
    def test_self_similarity_exactly_one(self, rng):
        img = random_u8(rng, 20, 20)
        assert qssim(img, img) == 1.0

    def test_reduces_to_grayscale_ssim_on_gray_pair(self, rng):
        # r = g = b and positively correlated pair: the quaternion embedding
        # is a scaled scalar, and the x3 constants cancel the scaling
        g = rng.integers(30, 200, (24, 24), dtype=np.uint8)
        a = np.repeat(g[..., None], 3, axis=2)
        b = np.repeat(np.clip(g.astype(int) + 12, 0, 255).astype(np.uint8)[..., None], 3, axis=2)
        assert qssim(a, b) == pytest.approx(ssim(a, b, grayscale=True), abs=1e-6)

    def test_random_pairs_match_oracle(self, rng):
        for _ in range(2):
            a, b = random_u8(rng, 20, 20), random_u8(rng, 20, 20)
            assert qssim(a, b) == pytest.approx(naive_qssim(a, b), abs=1e-6)

    def test_symmetry(self, rng):
        a, b = random_u8(rng, 20, 20), random_u8(rng, 20, 20)
        assert qssim(a, b) == pytest.approx(qssim(b, a), abs=1e-12)

    def test_value_in_range(self, rng):
        a, b = random_u8(rng, 16, 16), random_u8(rng, 16, 16)
        assert -1.0 <= qssim(a, b) <= 1.0


class TestPsnr:
    def test_identical_images_infinite(self, rng):
        img = random_u8(rng)
        assert math.isinf(psnr(img, img))

    def test_one_level_offset_closed_form(self):
        a = np.full((16, 16, 3), 100, dtype=np.uint8)
        b = np.full((16, 16, 3), 101, dtype=np.uint8)
        # MSE = 1 -> 10 log10(255^2) = 20 log10(255)
        assert psnr(a, b) == pytest.approx(20.0 * math.log10(255.0), abs=1e-12)
        assert psnr(a, b) == pytest.approx(48.1308, abs=1e-4)

    def test_matches_naive_mse_oracle(self, rng):
        a, b = random_u8(rng), random_u8(rng)
        err = 0.0
        for i in range(a.shape[0]):
            for j in range(a.shape[1]):
                for c in range(3):
                    err += (float(a[i, j, c]) - float(b[i, j, c])) ** 2
        mse = err / a.size
        assert psnr(a, b) == pytest.approx(10.0 * math.log10(255.0**2 / mse), abs=1e-9)

    def test_symmetry(self, rng):
        a, b = random_u8(rng), random_u8(rng)
        assert psnr(a, b) == psnr(b, a)


class TestEvaluateSet:
    def test_identical_triple(self, rng):
        img = random_u8(rng)
        report = evaluate_set([img], [img], [img])
        assert report.qssim_target == [1.0]
        assert report.ssim_target == [1.0]
        assert math.isinf(report.psnr_target[0])
        assert report.ssim_source == [1.0]
        s = report.summary()
        assert s["qssim_target"] == (1.0, 0.0)
        assert math.isinf(s["psnr_target"][0])

    def test_aggregation_arithmetic(self):
        report = MetricReport(
            qssim_target=[0.8, 0.9],
            ssim_target=[0.8, 0.9],
            psnr_target=[10.0, 20.0],
            ssim_source=[1.0, 1.0],
        )
        s = report.summary()
        assert s["ssim_target"][0] == pytest.approx(0.85)
        # sample std, divisor N-1
        assert s["ssim_target"][1] == pytest.approx(0.0707, abs=1e-4)
        assert s["ssim_source"] == (1.0, 0.0)

    def test_ordering_preserved(self, rng):
        imgs = [random_u8(rng, 16, 16) for _ in range(3)]
        tgt = random_u8(rng, 16, 16)
        report = evaluate_set(imgs, [tgt] * 3, imgs)
        direct = [ssim(img, tgt) for img in imgs]
        assert report.ssim_target == direct

    def test_length_mismatch(self, rng):
        img = random_u8(rng)
        with pytest.raises(DimensionError):
            evaluate_set([img], [img, img], [img])
