import numpy as np
import pytest

from stainforge import (
    AdamState,
    DimensionError,
    LrSchedule,
    NumericError,
    PixelImage,
    adam_step,
    adv_loss,
    cycle_loss,
    decode_u8,
    domain_loss,
    fit_mapper,
    identity_loss,
    lr_at,
    map_pixel,
    mapper_grads,
    mapper_loss,
    pack_params,
    random_scale,
    unpack_params,
)
from stainforge.mapper import _forward_flat
from tests.conftest import random_params, random_u8


def img_of(data):
    return PixelImage(np.asarray(data, dtype=np.float64))


class TestAdvLoss:
    def test_fixed_point(self):
        assert adv_loss(np.zeros((4, 4)), np.ones((4, 4))) == 0.0

    def test_worst_case_is_two(self):
        assert adv_loss(np.ones((3, 3)), np.zeros((3, 3))) == 2.0

    def test_half_scores(self):
        assert adv_loss(np.array([0.5]), np.array([0.5])) == pytest.approx(0.5)

    def test_mean_over_elements(self):
        assert adv_loss(np.array([0.0, 1.0]), np.array([1.0, 1.0])) == pytest.approx(0.5)

    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(DimensionError):
            adv_loss(np.zeros(0), np.ones(1))
        with pytest.raises(NumericError):
            adv_loss(np.array([np.nan]), np.ones(1))


class TestReconstructionLosses:
    def test_cycle_fixed_point(self, rng):
        s = img_of(rng.uniform(-1, 1, (4, 4, 3)))
        t = img_of(rng.uniform(-1, 1, (4, 4, 3)))
        assert cycle_loss(s, s, t, t) == 0.0

    def test_cycle_offset(self, rng):
        s = img_of(rng.uniform(-0.5, 0.5, (4, 4, 3)))
        t = img_of(rng.uniform(-0.5, 0.5, (4, 4, 3)))
        s_rec = img_of(s.data + 0.1)
        assert cycle_loss(s, s_rec, t, t) == pytest.approx(0.1, abs=1e-12)

    def test_cycle_homogeneity(self, rng):
        s = img_of(rng.uniform(-0.5, 0.5, (4, 4, 3)))
        t = img_of(rng.uniform(-0.5, 0.5, (4, 4, 3)))
        small = img_of(s.data + 0.05)
        big = img_of(s.data + 0.10)
        assert cycle_loss(s, big, t, t) == pytest.approx(
            2.0 * cycle_loss(s, small, t, t), abs=1e-12
        )

    def test_domain_fixed_point_and_offset(self, rng):
        ga = img_of(rng.uniform(-0.5, 0.5, (4, 4, 3)))
        gb = img_of(rng.uniform(-0.5, 0.5, (4, 4, 3)))
        assert domain_loss(ga, ga, gb, gb) == 0.0
        shifted = img_of(ga.data + 0.2)
        assert domain_loss(ga, shifted, gb, gb) == pytest.approx(0.2, abs=1e-12)

    def test_domain_symmetric_in_directions(self, rng):
        ga = img_of(rng.uniform(-0.5, 0.5, (4, 4, 3)))
        ta = img_of(rng.uniform(-0.5, 0.5, (4, 4, 3)))
        gb = img_of(rng.uniform(-0.5, 0.5, (4, 4, 3)))
        tb = img_of(rng.uniform(-0.5, 0.5, (4, 4, 3)))
        assert domain_loss(ga, ta, gb, tb) == pytest.approx(
            domain_loss(gb, tb, ga, ta), abs=1e-15
        )

    def test_identity_fixed_point_offset_additivity(self, rng):
        s = img_of(rng.uniform(-0.5, 0.5, (4, 4, 3)))
        t = img_of(rng.uniform(-0.5, 0.5, (4, 4, 3)))
        assert identity_loss(s, s, s, t, t, t) == 0.0
        gbs = img_of(s.data + 0.05)
        assert identity_loss(s, gbs, s, t, t, t) == pytest.approx(0.05, abs=1e-12)
        # additivity over the four terms
        tbs = img_of(s.data - 0.02)
        total = identity_loss(s, gbs, tbs, t, t, t)
        assert total == pytest.approx(0.05 + 0.02, abs=1e-12)

    def test_dimension_mismatch(self, rng):
        a = img_of(rng.uniform(-1, 1, (4, 4, 3)))
        b = img_of(rng.uniform(-1, 1, (4, 5, 3)))
        with pytest.raises(DimensionError):
            cycle_loss(a, b, a, a)


class TestRandomScale:
    def test_deterministic_per_seed(self, rng):
        img = decode_u8(random_u8(rng, 40, 60))
        a = random_scale(img, 99)
        b = random_scale(img, 99)
        assert np.array_equal(a.data, b.data)

    def test_factor_range_and_shape(self, rng):
        img = decode_u8(random_u8(rng, 100, 60))
        for seed in range(10):
            out = random_scale(img, seed)
            assert 50 <= out.height <= 100
            assert 30 <= out.width <= 60

    def test_factor_one_is_identity(self, rng):
        img = decode_u8(random_u8(rng, 12, 12))
        seed = next(
            s for s in range(10000) if np.random.default_rng(s).uniform(0.5, 1.0) > 0.9999
        )
        out = random_scale(img, seed)
        # factor ~ 1 rounds to the input size; sampling is then identity
        assert (out.height, out.width) == (12, 12)
        assert np.array_equal(out.data, img.data)

    def test_constant_stays_constant(self, rng):
        img = decode_u8(np.full((30, 20, 3), 64, dtype=np.uint8))
        out = random_scale(img, 3)
        assert np.all(out.data == img.data[0, 0])


class TestLrSchedule:
    def test_endpoints(self):
        sched = LrSchedule(total_iters=200000)
        assert lr_at(sched, 0) == 0.0
        assert lr_at(sched, 1000) == 2e-4
        assert lr_at(sched, 200000) == 0.0

    def test_piecewise_linear_and_continuous(self):
        sched = LrSchedule(total_iters=10000)
        assert lr_at(sched, 500) == pytest.approx(1e-4)
        assert lr_at(sched, 5500) == pytest.approx(2e-4 * 4500 / 9000)
        # peak is the max
        values = [lr_at(sched, it) for it in range(0, 10001, 100)]
        assert max(values) == 2e-4

    def test_out_of_range(self):
        sched = LrSchedule(total_iters=2000)
        with pytest.raises(DimensionError):
            lr_at(sched, -1)
        with pytest.raises(DimensionError):
            lr_at(sched, 2001)

    def test_warmup_must_fit(self):
        with pytest.raises(DimensionError):
            LrSchedule(total_iters=500)


class TestAdamStep:
    def test_zero_gradient_no_move(self):
        params = np.ones(59)
        out, state = adam_step(params, np.zeros(59), AdamState.zeros(), 0.01)
        assert np.array_equal(out, params)
        assert state.step == 1

    def test_first_step_closed_form(self):
        params = np.zeros(59)
        out, _ = adam_step(params, np.ones(59), AdamState.zeros(), 1e-3)
        # bias correction makes m_hat = v_hat = 1 on the first step
        want = -1e-3 * 1.0 / (1.0 + 1e-8)
        assert np.allclose(out, want, atol=1e-12)

    def test_first_step_sign_like(self):
        grads = np.zeros(59)
        grads[0], grads[1] = 0.3, 0.6
        out, _ = adam_step(np.zeros(59), grads, AdamState.zeros(), 1e-3)
        assert out[0] == pytest.approx(out[1], rel=1e-6)

    def test_nonfinite_grads_rejected(self):
        with pytest.raises(NumericError):
            adam_step(np.zeros(59), np.full(59, np.inf), AdamState.zeros(), 1e-3)


def fd_loss(vec, xs, ys):
    """Loss for finite differences via the mapper's own pixel kernel."""
    params = unpack_params(vec)
    pred = _forward_flat(xs, params)
    return float(np.mean((pred - ys) ** 2))


class TestMapperGrads:
    def test_zero_params_zero_targets(self):
        params = unpack_params(np.zeros(59))
        xs = np.random.default_rng(0).uniform(-1, 1, (16, 3))
        grads = mapper_grads(params, xs, np.zeros((16, 3)))
        assert np.array_equal(grads, np.zeros(59))

    def test_matches_central_finite_differences(self, rng):
        failures = 0
        for trial in range(100):
            vec = rng.uniform(-1.5, 1.5, 59)
            xs = rng.uniform(-1, 1, (32, 3))
            ys = rng.uniform(-0.9, 0.9, (32, 3))
            analytic = mapper_grads(unpack_params(vec), xs, ys)
            h = 1e-4
            for k in rng.choice(59, size=6, replace=False):
                vp, vm = vec.copy(), vec.copy()
                vp[k] += h
                vm[k] -= h
                fd = (fd_loss(vp, xs, ys) - fd_loss(vm, xs, ys)) / (2 * h)
                scale = max(abs(fd), abs(analytic[k]), 1e-8)
                if abs(analytic[k] - fd) / scale > 1e-4:
                    failures += 1
        assert failures == 0

    def test_duplicated_pixel_mean_invariance(self, rng):
        params = random_params(rng, scale=1.0)
        x = rng.uniform(-1, 1, (1, 3))
        y = rng.uniform(-0.9, 0.9, (1, 3))
        single = mapper_grads(params, x, y)
        repeated = mapper_grads(params, np.repeat(x, 7, axis=0), np.repeat(y, 7, axis=0))
        assert np.allclose(single, repeated, rtol=1e-12, atol=1e-15)

    def test_rejects_empty_batch(self, rng):
        with pytest.raises(DimensionError):
            mapper_grads(random_params(rng), np.zeros((0, 3)), np.zeros((0, 3)))


def make_task(rng, n=40000, span=0.7, permute=False):
    xs = rng.uniform(-span, span, (n, 3))
    ys = xs[:, [1, 2, 0]] if permute else xs
    return xs, ys


class TestFitMapper:
    SCHED = LrSchedule(total_iters=5000, peak=3e-3, warmup_iters=1000)

    def test_identity_task_converges(self):
        rng = np.random.default_rng(0)
        xs, ys = make_task(rng)
        params, curve = fit_mapper(xs, ys, self.SCHED, seed=0)
        assert mapper_loss(params, xs, ys) < 1e-3
        assert curve[0][0] == 0 and curve[0][1] == 0.0
        assert curve[-1][0] == 5000

    def test_channel_permutation_converges(self):
        rng = np.random.default_rng(1)
        xs, ys = make_task(rng, permute=True)
        params, _ = fit_mapper(xs, ys, self.SCHED, seed=1)
        assert mapper_loss(params, xs, ys) < 1e-3

    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(2)
        xs, ys = make_task(rng, n=2000)
        sched = LrSchedule(total_iters=300, peak=1e-3, warmup_iters=100)
        p1, c1 = fit_mapper(xs, ys, sched, seed=7)
        p2, c2 = fit_mapper(xs, ys, sched, seed=7)
        assert np.array_equal(pack_params(p1), pack_params(p2))
        assert c1 == c2

    def test_learned_map_applies_pointwise(self):
        # the fitted parameters drive map_pixel directly
        rng = np.random.default_rng(3)
        xs, ys = make_task(rng, n=5000)
        params, _ = fit_mapper(xs, ys, self.SCHED, seed=3)
        probe = np.array([0.25, -0.4, 0.1])
        assert np.allclose(map_pixel(probe, params), probe, atol=0.15)

    def test_too_few_pairs_rejected(self):
        with pytest.raises(DimensionError):
            fit_mapper(np.zeros((50, 3)), np.zeros((50, 3)), self.SCHED)
