import math

import numpy as np
import pytest

from whiteprior.baselines import NlmParams, nlm_denoise
from whiteprior.metrics import psnr
from whiteprior.noise import NoiseModel, PhantomSpec, add_awgn, generate_phantom


def nlm_pixel_bruteforce(x, r0, c0, p, r, sigma, h, order=None):
    """One output pixel by explicit loops over the mirrored search window."""
    xp = np.pad(x, r + p, mode="reflect")
    r0, c0 = r0 + r + p, c0 + r + p
    ref = xp[r0 - p : r0 + p + 1, c0 - p : c0 + p + 1]
    offsets = [(dr, dc) for dr in range(-r, r + 1) for dc in range(-r, r + 1)]
    if order is not None:
        offsets = [offsets[i] for i in order]
    num = den = 0.0
    for dr, dc in offsets:
        q = xp[r0 + dr - p : r0 + dr + p + 1, c0 + dc - p : c0 + dc + p + 1]
        d2 = np.mean((ref - q) ** 2)
        w = math.exp(-max(d2 - 2 * sigma * sigma, 0.0) / (h * h))
        num += w * xp[r0 + dr, c0 + dc]
        den += w
    return num / den


def test_constant_image_unchanged():
    x = np.full((20, 20), 0.42)
    np.testing.assert_allclose(nlm_denoise(x, NlmParams(sigma=0.1)), 0.42, rtol=1e-14)


def test_vanishing_filter_returns_input(rng):
    x = rng.random((16, 16))
    out = nlm_denoise(x, NlmParams(patch_radius=1, search_radius=3, sigma=0.0, filter_h=1e-6))
    np.testing.assert_allclose(out, x, atol=1e-12)


@pytest.mark.parametrize("pixel", [(0, 0), (5, 7), (11, 3), (13, 13)])
def test_matches_bruteforce(rng, pixel):
    x = rng.random((14, 14))
    params = NlmParams(patch_radius=1, search_radius=3, sigma=0.05, filter_h=0.2)
    out = nlm_denoise(x, params)
    expected = nlm_pixel_bruteforce(x, *pixel, 1, 3, 0.05, 0.2)
    assert out[pixel] == pytest.approx(expected, rel=1e-12)
    # visiting the search window in another order changes nothing
    order = np.random.default_rng(1).permutation(49)
    assert nlm_pixel_bruteforce(x, *pixel, 1, 3, 0.05, 0.2, order) == pytest.approx(expected, rel=1e-12)


def test_output_within_input_range(rng):
    x = rng.random((18, 18))
    out = nlm_denoise(x, NlmParams(patch_radius=1, search_radius=4))
    assert out.min() >= x.min() - 1e-12 and out.max() <= x.max() + 1e-12


def test_improves_phantom():
    clean = generate_phantom(PhantomSpec(seed=5))
    x = add_awgn(clean, NoiseModel(25 / 255, seed=5))
    assert psnr(nlm_denoise(x), clean) > psnr(x, clean)


def test_blind_level_defaults_to_estimate(rng):
    x = rng.random((16, 16))
    sigma, h = NlmParams().resolve(x)
    assert h == pytest.approx(0.55 * sigma)


@pytest.mark.parametrize(
    "kwargs", [dict(patch_radius=0), dict(patch_radius=3, search_radius=2), dict(filter_h=0.0), dict(sigma=-1.0)]
)
def test_param_validation(kwargs):
    with pytest.raises(ValueError):
        NlmParams(**kwargs)


def test_rejects_tiny_image():
    with pytest.raises(ValueError):
        nlm_denoise(np.zeros((6, 6)), NlmParams(patch_radius=3))
