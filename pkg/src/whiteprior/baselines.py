"""Non-local means, the classic comparison denoiser."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ._validation import check_image
from .noise import estimate_sigma

NLM_H_FACTOR = 0.55


@dataclass(frozen=True)
class NlmParams:
    """Patch and search radii plus the noise level and filtering strength.

    ``sigma=None`` estimates the level blindly from the input; ``filter_h=None``
    uses ``0.55 * sigma``.
    """

    patch_radius: int = 3
    search_radius: int = 10
    sigma: float | None = None
    filter_h: float | None = None

    def __post_init__(self):
        if self.patch_radius < 1:
            raise ValueError(f"patch_radius must be >= 1, got {self.patch_radius}")
        if self.search_radius < self.patch_radius:
            raise ValueError("search_radius must be >= patch_radius")
        if self.sigma is not None and not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.filter_h is not None and not self.filter_h > 0:
            raise ValueError(f"filter_h must be positive, got {self.filter_h}")

    def resolve(self, image):
        """Return ``(sigma, h)`` for ``image``."""
        sigma = estimate_sigma(image) if self.sigma is None else float(self.sigma)
        h = self.filter_h if self.filter_h is not None else NLM_H_FACTOR * sigma
        if not h > 0:
            raise ValueError("filter strength resolved to 0; pass filter_h explicitly")
        return sigma, float(h)


def nlm_denoise(x, params=None):
    """Pixel-wise non-local means with the ``2 sigma^2`` distance offset.

    Each output pixel is the weighted mean of its search window, weights
    ``exp(-max(d2 - 2 sigma^2, 0) / h^2)`` where ``d2`` is the mean squared
    difference between patches. Borders are mirrored.
    """
    params = params or NlmParams()
    p, r = int(params.patch_radius), int(params.search_radius)
    x = check_image(x, name="x", min_shape=(2 * p + 2, 2 * p + 2))
    sigma, filter_h = params.resolve(x)
    height, width = x.shape
    pad = r + p
    xp = np.pad(x, pad, mode="reflect")
    inner = (slice(pad, pad + height), slice(pad, pad + width))
    offset2 = 2.0 * sigma * sigma
    inv_h2 = 1.0 / (filter_h * filter_h)
    acc = np.zeros_like(x)
    wsum = np.zeros_like(x)
    for dr in range(-r, r + 1):
        for dc in range(-r, r + 1):
            # wrap-around from roll never reaches the rows/cols read for ``inner``
            shifted = np.roll(xp, (-dr, -dc), axis=(0, 1))
            d2 = ndimage.uniform_filter((xp - shifted) ** 2, size=2 * p + 1, mode="constant")[inner]
            weight = np.exp(-np.maximum(d2 - offset2, 0.0) * inv_h2)
            acc += weight * shifted[inner]
            wsum += weight
    return acc / wsum
