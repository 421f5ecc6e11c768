"""Image quality metrics and the paired significance test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.special import betainc

from ._validation import check_image, check_same_shape


@dataclass(frozen=True)
class SsimParams:
    window: int = 11
    window_std: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    peak: float = 1.0

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"SSIM window must be a positive odd integer, got {self.window}")
        if not (self.k1 > 0 and self.k2 > 0 and self.peak > 0 and self.window_std > 0):
            raise ValueError("k1, k2, peak and window_std must be positive")


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    p_value: float
    degrees_of_freedom: int


class DegenerateTestError(ValueError):
    """All paired differences are identical, so the t statistic is undefined."""


def psnr(estimate, reference, peak=1.0):
    """Peak signal-to-noise ratio in dB; ``inf`` when the images match."""
    a = check_image(estimate, name="estimate")
    b = check_image(reference, name="reference")
    check_same_shape(a, b, ("estimate", "reference"))
    if not peak > 0:
        raise ValueError("peak must be positive")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _gaussian_window(size, std):
    r = size // 2
    g = np.exp(-0.5 * (np.arange(-r, r + 1) / std) ** 2)
    return g / g.sum()


def ssim(a, b, params=None):
    """Mean SSIM over every window position fully inside the image."""
    params = params or SsimParams()
    a = check_image(a, name="a")
    b = check_image(b, name="b")
    check_same_shape(a, b)
    if min(a.shape) < params.window:
        raise ValueError(f"image {a.shape} is smaller than the {params.window}px SSIM window")
    g = _gaussian_window(params.window, params.window_std)
    r = params.window // 2

    def local_mean(img):
        out = ndimage.correlate1d(img, g, axis=0, mode="reflect")
        out = ndimage.correlate1d(out, g, axis=1, mode="reflect")
        return out[r : img.shape[0] - r, r : img.shape[1] - r]

    mu_a, mu_b = local_mean(a), local_mean(b)
    var_a = local_mean(a * a) - mu_a * mu_a
    var_b = local_mean(b * b) - mu_b * mu_b
    cov = local_mean(a * b) - mu_a * mu_b
    c1 = (params.k1 * params.peak) ** 2
    c2 = (params.k2 * params.peak) ** 2
    index = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    )
    return float(index.mean())


def student_t_two_sided_p(t, df):
    """Two-sided tail probability of Student's t via the regularised incomplete beta."""
    if math.isinf(t):
        return 0.0
    return float(min(1.0, betainc(df / 2.0, 0.5, df / (df + t * t))))


def paired_t_test(scores_a, scores_b):
    """Paired two-sided t-test on ``a - b``."""
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise ValueError(f"score lists must have equal length, got {a.shape} and {b.shape}")
    n = a.size
    if n < 2:
        raise ValueError("paired t-test needs at least two pairs")
    d = a - b
    if np.all(d == d[0]):
        raise DegenerateTestError("paired differences have zero variance")
    sd = float(np.std(d, ddof=1))
    t = float(np.mean(d)) / (sd / math.sqrt(n))
    df = n - 1
    return TTestResult(t_statistic=t, p_value=student_t_two_sided_p(t, df), degrees_of_freedom=df)
