"""Input validation helpers shared by the public functions and estimators."""

from __future__ import annotations

import numpy as np


def check_image(image, *, name="image", min_shape=(1, 1), bounded=False, copy=False):
    """Return ``image`` as a finite 2-D float64 array.

    Parameters
    ----------
    image : array-like
        Candidate grayscale image.
    name : str
        Used in error messages.
    min_shape : tuple of int
        Minimum ``(height, width)``.
    bounded : bool
        If true, every value must lie in ``[0, 1]``.
    copy : bool
        Force a copy even when the input is already float64.
    """
    arr = np.array(image, dtype=np.float64, copy=copy or None)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D grayscale array, got shape {arr.shape}")
    h, w = arr.shape
    if h < min_shape[0] or w < min_shape[1]:
        raise ValueError(
            f"{name} must be at least {min_shape[0]}x{min_shape[1]}, got {h}x{w}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinite values")
    if bounded and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError(f"{name} values must lie in [0, 1]")
    return arr


def check_same_shape(a, b, names=("a", "b")):
    if a.shape != b.shape:
        raise ValueError(
            f"dimension mismatch: {names[0]} has shape {a.shape}, {names[1]} has shape {b.shape}"
        )
