import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import central_diff_grad, max_rel_error
from whiteprior.losses import (
    DecompositionState,
    LossConfig,
    StochasticDraw,
    ac_loss,
    draw_stochastic,
    pc_loss,
    rec_loss,
    sample_autocorrelation,
    st_loss,
    total_loss,
    tv_loss,
)

SEEDS = range(10)
LAGS = [(0, 1), (1, 0), (-2, 3), (5, -7), (7, 7)]


def reflect_autocorr_bruteforce(n, lag):
    """Explicit double loop over pixels with mirror indexing (no edge repeat)."""
    h, w = n.shape

    def mirror(i, size):
        if i < 0:
            return -i
        if i >= size:
            return 2 * (size - 1) - i
        return i

    total = 0.0
    for sign in (1, -1):
        for r in range(h):
            for c in range(w):
                total += n[r, c] * n[mirror(r + sign * lag[0], h), mirror(c + sign * lag[1], w)]
    return total / (2 * h * w)


class TestRec:
    def test_exact_decomposition(self, rng):
        x, s = rng.random((2, 6, 6))
        v, gs, gn = rec_loss(x, DecompositionState(s, x - s))
        assert v == 0.0 and not gs.any() and not gn.any()

    def test_constant_residual(self):
        z = np.zeros((4, 4))
        assert rec_loss(np.full((4, 4), 0.5), DecompositionState(z, z))[0] == 0.25

    @pytest.mark.parametrize("seed", SEEDS)
    def test_gradient(self, seed):
        rng = np.random.default_rng(seed)
        x, s, n = rng.random((3, 8, 8))
        _, gs, gn = rec_loss(x, DecompositionState(s, n))
        fs = central_diff_grad(lambda u: rec_loss(x, DecompositionState(u, n))[0], s, 1e-6)
        fn = central_diff_grad(lambda u: rec_loss(x, DecompositionState(s, u))[0], n, 1e-6)
        assert max_rel_error(gs, fs) < 1e-6
        assert max_rel_error(gn, fn) < 1e-6

    def test_joint_convexity(self, rng):
        x = rng.random((5, 5))
        a = DecompositionState(*rng.standard_normal((2, 5, 5)))
        b = DecompositionState(*rng.standard_normal((2, 5, 5)))
        mid = DecompositionState((a.signal + b.signal) / 2, (a.noise + b.noise) / 2)
        assert rec_loss(x, mid)[0] <= (rec_loss(x, a)[0] + rec_loss(x, b)[0]) / 2


class TestAutocorrelation:
    def test_zero_noise(self):
        v, g = ac_loss(np.zeros((6, 6)), [(1, 2)])
        assert v == 0.0 and not g.any()

    def test_hand_case(self):
        n = np.array([[1.0, -1.0], [-1.0, 1.0]])
        # padded row [1, -1 | 1]: products -1, -1 in both rows, both directions
        assert reflect_autocorr_bruteforce(n, (0, 1)) == -1.0
        assert sample_autocorrelation(n, (0, 1)) == -1.0
        value, _ = ac_loss(n, [(0, 1)])
        assert value == 1.0

    @pytest.mark.parametrize("lag", LAGS)
    def test_matches_bruteforce(self, rng, lag):
        n = rng.standard_normal((8, 9))
        assert sample_autocorrelation(n, lag) == pytest.approx(reflect_autocorr_bruteforce(n, lag), abs=1e-13)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_gradient(self, seed):
        rng = np.random.default_rng(seed)
        n = rng.standard_normal((8, 8))
        lags = [LAGS[seed % len(LAGS)], LAGS[(seed + 2) % len(LAGS)]]
        _, g = ac_loss(n, lags)
        f = central_diff_grad(lambda u: ac_loss(u, lags)[0], n, 1e-5)
        assert max_rel_error(g, f) < 1e-4

    def test_white_noise_concentration(self):
        sigma, m = 0.1, 128 * 128
        for seed in range(20):
            n = sigma * np.random.default_rng(seed).standard_normal((128, 128))
            for lag in ((0, 1), (1, 0)):
                assert abs(sample_autocorrelation(n, lag)) < 3 * sigma**2 / math.sqrt(m)

    @pytest.mark.parametrize("lag", LAGS)
    def test_symmetric_under_negation(self, rng, lag):
        n = rng.standard_normal((9, 8))
        neg = (-lag[0], -lag[1])
        assert abs(ac_loss(n, [lag])[0] - ac_loss(n, [neg])[0]) < 1e-12

    def test_quartic_scaling(self, rng):
        n = rng.standard_normal((8, 8))
        for a in (0.5, 2.0, 4.0):
            # powers of two keep the scaling exact in floating point
            assert ac_loss(a * n, [(1, 1)])[0] == ac_loss(n, [(1, 1)])[0] * a**4

    @pytest.mark.parametrize("lags", [[], [(0, 0)], [(8, 0)], [(0, -8)]])
    def test_rejects_bad_lags(self, lags):
        with pytest.raises(ValueError):
            ac_loss(np.ones((8, 8)), lags)


class TestStationarity:
    @pytest.mark.parametrize("b", [2, 4])
    def test_tiled_block_hits_floor(self, rng, b):
        tile = rng.standard_normal((b, b))
        n = np.tile(tile, (16 // b, 16 // b))
        value, _ = st_loss(n, b)
        assert abs(value - math.log((16 // b) ** 2)) < 1e-9

    def test_heteroscedastic_case(self):
        n = np.zeros((4, 4))
        n[:2, :2] = [[1.0, -1.0], [-1.0, 1.0]]
        eps = 1e-8
        z = np.array([math.sqrt(1 + eps)] + [math.sqrt(eps)] * 3)
        psi = np.exp(z) / np.exp(z).sum()
        expected = -np.mean(np.log(psi))
        value, _ = st_loss(n, 2, eps)
        assert value == pytest.approx(expected, rel=1e-12)
        assert value > math.log(4)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_gradient(self, seed):
        rng = np.random.default_rng(seed)
        n = rng.standard_normal((8, 8))
        b = 2 if seed % 2 == 0 else 4
        _, g = st_loss(n, b)
        f = central_diff_grad(lambda u: st_loss(u, b)[0], n, 1e-6)
        assert max_rel_error(g, f) < 1e-4

    def test_partial_blocks_ignored(self, rng):
        n = rng.standard_normal((9, 11))
        v1, g = st_loss(n, 4)
        v2, _ = st_loss(n[:8, :8], 4)
        assert v1 == v2
        assert not g[8:, :].any() and not g[:, 8:].any()

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, (8, 8), elements=st.floats(-10, 10)), st.sampled_from([2, 4]))
    def test_never_below_floor(self, n, b):
        assert st_loss(n, b)[0] >= math.log((8 // b) ** 2) - 1e-12

    @pytest.mark.parametrize("shape,b", [((3, 3), 2), ((4, 4), 4), ((4, 4), 1)])
    def test_rejects_too_few_blocks(self, shape, b):
        with pytest.raises(ValueError):
            st_loss(np.ones(shape), b)


class TestPiecewiseConstant:
    def test_exact_and_offset(self, rng):
        m = rng.random((6, 7))
        assert pc_loss(m, m)[0] == 0.0
        assert pc_loss(m + 0.3, m)[0] == pytest.approx(0.0, abs=1e-28)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_gradient(self, seed):
        rng = np.random.default_rng(seed)
        s, m = rng.random((2, 8, 8))
        _, g = pc_loss(s, m)
        f = central_diff_grad(lambda u: pc_loss(u, m)[0], s, 1e-6)
        assert max_rel_error(g, f) < 1e-6

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            pc_loss(np.zeros((3, 3)), np.zeros((3, 4)))


class TestTotalVariation:
    def test_constant(self):
        assert tv_loss(np.full((5, 5), 0.7))[0] == 0.0

    def test_ramp_limit(self):
        c = 0.2
        value, _ = tv_loss(np.array([[0.0, c, 2 * c, 3 * c]]), 1e-12)
        assert value == pytest.approx(3 * c / 4, rel=1e-9)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_gradient_away_from_kinks(self, seed):
        rng = np.random.default_rng(seed)
        s = rng.random((8, 8))
        eps = 1e-6
        _, g = tv_loss(s, eps)
        f = central_diff_grad(lambda u: tv_loss(u, eps)[0], s, 1e-5)
        gx = np.abs(np.diff(s, axis=1))
        gy = np.abs(np.diff(s, axis=0))
        near_kink = np.zeros(s.shape, dtype=bool)
        near_kink[:, :-1] |= gx < 10 * eps
        near_kink[:, 1:] |= gx < 10 * eps
        near_kink[:-1, :] |= gy < 10 * eps
        near_kink[1:, :] |= gy < 10 * eps
        assert max_rel_error(g, f, ~near_kink) < 1e-3

    @pytest.mark.parametrize("loss", [pc_loss, tv_loss])
    def test_offset_invariance(self, rng, loss):
        s, m = rng.random((2, 8, 8))
        args = (m,) if loss is pc_loss else ()
        assert abs(loss(s + 0.37, *args)[0] - loss(s, *args)[0]) < 1e-12


class TestTotal:
    def setup_method(self):
        rng = np.random.default_rng(5)
        self.x = rng.random((16, 16))
        self.s = rng.random((16, 16))
        self.n = 0.1 * rng.standard_normal((16, 16))
        self.m = rng.random((16, 16))
        self.draw = StochasticDraw(lags=((1, 2), (0, 1)), block_size=4)

    def test_rec_only_switchboard(self):
        cfg = LossConfig(weight_rec=1.0, weight_ac=0, weight_st=0, weight_pc=0, weight_tv=0)
        state = DecompositionState(self.s, self.n)
        out = total_loss(self.x, state, self.m, cfg, self.draw)
        v, gs, gn = rec_loss(self.x, state)
        assert out.per_term == {"rec": v} and out.total == v
        np.testing.assert_array_equal(out.grad_signal, gs)
        np.testing.assert_array_equal(out.grad_noise, gn)

    def test_signal_terms_vanish(self):
        m = np.zeros((16, 16))
        m[:, 8:] = 0.6
        state = DecompositionState(m.copy(), self.x - m)
        cfg = LossConfig()
        out = total_loss(self.x, state, m, cfg, self.draw)
        ac, _ = ac_loss(state.noise, self.draw.lags)
        stv, _ = st_loss(state.noise, 4)
        assert out.per_term["rec"] == 0.0 and out.per_term["pc"] == 0.0
        # the single vertical edge still carries total variation
        tv_edge = out.per_term["tv"]
        assert out.total == pytest.approx(cfg.weight_ac * ac + cfg.weight_st * stv + cfg.weight_tv * tv_edge, abs=1e-12)

    def test_total_matches_independent_sum(self):
        cfg = LossConfig(weight_rec=0.7, weight_ac=3.0, weight_st=0.2, weight_pc=1.5, weight_tv=0.01)
        out = total_loss(self.x, DecompositionState(self.s, self.n), self.m, cfg, self.draw)
        w = cfg.weights()
        assert abs(out.total - math.fsum(w[t] * v for t, v in out.per_term.items())) < 1e-12
        assert set(out.per_term) == {"rec", "ac", "st", "pc", "tv"}

    @pytest.mark.parametrize("seed", range(3))
    def test_composite_gradient(self, seed):
        rng = np.random.default_rng(seed)
        x, s, m = rng.random((3, 8, 8))
        n = rng.standard_normal((8, 8))
        cfg = LossConfig(weight_tv=0.01)
        draw = StochasticDraw(lags=((1, 1),), block_size=2)
        out = total_loss(x, DecompositionState(s, n), m, cfg, draw)
        fs = central_diff_grad(lambda u: total_loss(x, DecompositionState(u, n), m, cfg, draw).total, s, 1e-6)
        fn = central_diff_grad(lambda u: total_loss(x, DecompositionState(s, u), m, cfg, draw).total, n, 1e-6)
        assert max_rel_error(out.grad_signal, fs) < 1e-4
        assert max_rel_error(out.grad_noise, fn) < 1e-4


class TestConfigAndDraws:
    def test_defaults(self):
        cfg = LossConfig()
        assert cfg.weights() == {"rec": 1.0, "ac": 1.0, "st": 1.0, "pc": 1.0, "tv": 5e-5}
        assert cfg.st_block_sizes == (2, 4, 8, 16)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(weight_rec=0, weight_ac=0, weight_st=0, weight_pc=0, weight_tv=0),
            dict(weight_ac=-1),
            dict(st_block_sizes=()),
            dict(st_block_sizes=(1,)),
            dict(tv_epsilon=0),
            dict(ac_max_lag=0),
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            LossConfig(**kwargs)

    def test_draws_respect_bounds(self):
        cfg = LossConfig(ac_lags_per_step=50)
        rng = np.random.default_rng(0)
        seen = set()
        for _ in range(40):
            d = draw_stochastic(cfg, (64, 64), rng)
            assert all(lag != (0, 0) and max(map(abs, lag)) <= 16 for lag in d.lags)
            seen.update(d.lags)
            assert d.block_size in (2, 4, 8, 16)
        assert len(seen) > 500

    def test_draws_adapt_to_small_images(self):
        d = draw_stochastic(LossConfig(ac_lags_per_step=30), (5, 9), np.random.default_rng(1))
        assert all(abs(r) <= 4 and abs(c) <= 4 for r, c in d.lags)
        assert d.block_size == 2
