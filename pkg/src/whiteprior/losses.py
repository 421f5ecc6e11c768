"""Loss terms for the joint signal/noise decomposition.

Every term returns its value together with the analytic gradient with
respect to the variable(s) it depends on. ``M`` below is the pixel count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp, softmax

from ._validation import check_same_shape
from .imagegrid import (
    forward_diff_x,
    forward_diff_x_adjoint,
    forward_diff_y,
    forward_diff_y_adjoint,
)

TERMS = ("rec", "ac", "st", "pc", "tv")


class NonFiniteLossError(FloatingPointError):
    """A loss value or gradient became NaN/inf; ``term`` names the culprit."""

    def __init__(self, term, message=None, trace=None):
        self.term = term
        self.trace = trace
        super().__init__(message or f"non-finite value in loss term {term!r}")


@dataclass(frozen=True)
class DecompositionState:
    signal: np.ndarray
    noise: np.ndarray

    def __post_init__(self):
        check_same_shape(self.signal, self.noise, ("signal", "noise"))


@dataclass(frozen=True)
class LossConfig:
    """Weights of the five terms plus the knobs of the stochastic ones.

    Defaults follow the reference training setup: unit weights everywhere
    except total variation at 5e-5, and block sizes drawn from {2, 4, 8, 16}.
    """

    weight_rec: float = 1.0
    weight_ac: float = 1.0
    weight_st: float = 1.0
    weight_pc: float = 1.0
    weight_tv: float = 5e-5
    ac_max_lag: int = 16
    ac_lags_per_step: int = 1
    st_block_sizes: tuple = (2, 4, 8, 16)
    tv_epsilon: float = 1e-6
    st_epsilon: float = 1e-8
    st_temperature: float = 1.0

    def __post_init__(self):
        weights = self.weights()
        if any(not math.isfinite(v) or v < 0 for v in weights.values()):
            raise ValueError(f"loss weights must be finite and >= 0, got {weights}")
        if not any(v > 0 for v in weights.values()):
            raise ValueError("at least one loss weight must be positive")
        if self.ac_max_lag < 1 or self.ac_lags_per_step < 1:
            raise ValueError("ac_max_lag and ac_lags_per_step must be positive")
        sizes = tuple(int(b) for b in self.st_block_sizes)
        if not sizes or any(b < 2 for b in sizes):
            raise ValueError("st_block_sizes must be a non-empty list of integers >= 2")
        object.__setattr__(self, "st_block_sizes", sizes)
        for name in ("tv_epsilon", "st_epsilon", "st_temperature"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def weights(self):
        return {t: float(getattr(self, f"weight_{t}")) for t in TERMS}

    def with_weights(self, **weights):
        return replace(self, **{f"weight_{k}": v for k, v in weights.items()})


@dataclass(frozen=True)
class StochasticDraw:
    lags: tuple = ((0, 1),)
    block_size: int = 2


@dataclass
class LossBreakdown:
    total: float
    per_term: dict = field(default_factory=dict)
    grad_signal: np.ndarray = None
    grad_noise: np.ndarray = None


def valid_block_sizes(shape, sizes):
    """Block sizes that leave at least two complete blocks in ``shape``."""
    h, w = shape
    return tuple(b for b in sizes if (h // b) * (w // b) >= 2)


def draw_stochastic(config, shape, rng):
    """Sample the lags and block size for one update.

    Lags are uniform over the square ``[-L, L]^2`` without the origin, with
    ``L`` capped so reflect padding stays single-fold on small images.
    """
    h, w = shape
    max_lag = min(config.ac_max_lag, h - 1, w - 1)
    if max_lag < 1:
        raise ValueError(f"image {h}x{w} is too small for any autocorrelation lag")
    side = 2 * max_lag + 1
    centre = (side * side) // 2
    codes = rng.integers(side * side - 1, size=config.ac_lags_per_step)
    codes = codes + (codes >= centre)
    lags = tuple((int(c // side) - max_lag, int(c % side) - max_lag) for c in codes)
    sizes = valid_block_sizes(shape, config.st_block_sizes)
    if not sizes:
        raise ValueError(f"no block size in {config.st_block_sizes} fits two blocks in {h}x{w}")
    block = int(sizes[rng.integers(len(sizes))])
    return StochasticDraw(lags=lags, block_size=block)


def rec_loss(x, state):
    """Mean squared reconstruction error of ``signal + noise`` against ``x``."""
    check_same_shape(x, state.signal, ("x", "signal"))
    residual = x - state.signal - state.noise
    m = residual.size
    value = float(np.dot(residual.ravel(), residual.ravel())) / m
    grad = (-2.0 / m) * residual
    return value, grad, grad.copy()


def _reflect(i, n):
    i = np.abs(i)
    return np.where(i > n - 1, 2 * (n - 1) - i, i)


def _shift_index(shape, lag):
    """Flat index of the reflect-padded neighbour ``(r + dr, c + dc)``."""
    h, w = shape
    dr, dc = lag
    rows = _reflect(np.arange(h) + dr, h)
    cols = _reflect(np.arange(w) + dc, w)
    return (rows[:, None] * w + cols[None, :]).ravel()


def sample_autocorrelation(n, lag):
    """Reflect-padded sample autocorrelation, averaged over ``lag`` and ``-lag``."""
    n = np.asarray(n, dtype=np.float64)
    flat = n.ravel()
    total = 0.0
    for sign in (1, -1):
        idx = _shift_index(n.shape, (sign * lag[0], sign * lag[1]))
        total += float(np.dot(flat, flat[idx]))
    return total / (2.0 * flat.size)


def _check_lags(shape, lags):
    if len(lags) == 0:
        raise ValueError("lag list is empty")
    h, w = shape
    for dr, dc in lags:
        if dr == 0 and dc == 0:
            raise ValueError("lag (0, 0) is the variance, not a correlation")
        if abs(dr) >= h or abs(dc) >= w:
            raise ValueError(f"lag {(dr, dc)} too large for a {h}x{w} image")


def ac_loss(n, lags):
    """Mean squared sample autocorrelation of the noise over ``lags``.

    The estimator is symmetrised over ``+lag`` and ``-lag``; one-sided
    reflect padding is otherwise not invariant to lag negation.
    """
    n = np.asarray(n, dtype=np.float64)
    _check_lags(n.shape, lags)
    flat = n.ravel()
    m = flat.size
    value = 0.0
    grad = np.zeros(m)
    for lag in lags:
        r_sum = 0.0
        d_r = np.zeros(m)
        for sign in (1, -1):
            idx = _shift_index(n.shape, (sign * lag[0], sign * lag[1]))
            shifted = flat[idx]
            r_sum += float(np.dot(flat, shifted))
            # d/dn_j of sum_i n_i n_idx(i): direct term plus folded-back scatter
            d_r += shifted + np.bincount(idx, weights=flat, minlength=m)
        r_bar = r_sum / (2.0 * m)
        value += r_bar * r_bar
        grad += (2.0 * r_bar / (2.0 * m)) * d_r
    count = len(lags)
    return value / count, (grad / count).reshape(n.shape)


def block_stds(n, block_size, st_epsilon=1e-8):
    """Per-block ``sqrt(var + eps)`` over complete non-overlapping blocks."""
    n = np.asarray(n, dtype=np.float64)
    b = int(block_size)
    hb, wb = n.shape[0] // b, n.shape[1] // b
    blocks = n[: hb * b, : wb * b].reshape(hb, b, wb, b)
    means = blocks.mean(axis=(1, 3), keepdims=True)
    centred = blocks - means
    var = (centred * centred).mean(axis=(1, 3))
    return np.sqrt(var + st_epsilon), centred


def st_loss(n, block_size, st_epsilon=1e-8, temperature=1.0):
    """Cross-entropy between the uniform law and a softmax over block stds.

    Equals ``log B`` exactly when every block has the same spread and is
    larger otherwise.
    """
    n = np.asarray(n, dtype=np.float64)
    b = int(block_size)
    if b < 2:
        raise ValueError(f"block size must be >= 2, got {b}")
    hb, wb = n.shape[0] // b, n.shape[1] // b
    count = hb * wb
    if count < 2:
        raise ValueError(f"a {n.shape[0]}x{n.shape[1]} grid holds fewer than 2 blocks of size {b}")
    stds, centred = block_stds(n, b, st_epsilon)
    z = stds / temperature
    value = float(logsumexp(z) - z.mean())
    d_std = (softmax(z, axis=None) - 1.0 / count) / temperature
    d_blocks = centred * (d_std / (b * b * stds))[:, None, :, None]
    grad = np.zeros_like(n)
    grad[: hb * b, : wb * b] = d_blocks.reshape(hb * b, wb * b)
    return value, grad


def pc_loss(s, m_target):
    """Squared L2 distance between the gradients of ``s`` and of the target."""
    check_same_shape(s, m_target, ("signal", "m_target"))
    dx = forward_diff_x(s) - forward_diff_x(m_target)
    dy = forward_diff_y(s) - forward_diff_y(m_target)
    m = dx.size
    value = float(np.sum(dx * dx) + np.sum(dy * dy)) / m
    grad = (2.0 / m) * (forward_diff_x_adjoint(dx) + forward_diff_y_adjoint(dy))
    return value, grad


def tv_loss(s, tv_epsilon=1e-6):
    """Anisotropic total variation with Charbonnier smoothing of ``|g|``."""
    if not tv_epsilon > 0:
        raise ValueError("tv_epsilon must be positive")
    gx = forward_diff_x(s)
    gy = forward_diff_y(s)
    eps2 = tv_epsilon * tv_epsilon
    rx = np.sqrt(gx * gx + eps2)
    ry = np.sqrt(gy * gy + eps2)
    m = gx.size
    value = float(np.sum(rx - tv_epsilon) + np.sum(ry - tv_epsilon)) / m
    grad = (forward_diff_x_adjoint(gx / rx) + forward_diff_y_adjoint(gy / ry)) / m
    return value, grad


def _finite(term, value, *grads):
    if not math.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads):
        raise NonFiniteLossError(term)


def total_loss(x, state, m_target, config, draw):
    """Weighted sum of the enabled terms for one stochastic draw.

    ``per_term`` holds unweighted values; zero-weight terms are not evaluated.
    """
    check_same_shape(x, state.signal, ("x", "signal"))
    check_same_shape(x, m_target, ("x", "m_target"))
    weights = config.weights()
    grad_s = np.zeros_like(state.signal)
    grad_n = np.zeros_like(state.noise)
    per_term = {}

    if weights["rec"] > 0:
        v, gs, gn = rec_loss(x, state)
        _finite("rec", v, gs)
        per_term["rec"] = v
        grad_s += weights["rec"] * gs
        grad_n += weights["rec"] * gn
    if weights["ac"] > 0:
        v, gn = ac_loss(state.noise, draw.lags)
        _finite("ac", v, gn)
        per_term["ac"] = v
        grad_n += weights["ac"] * gn
    if weights["st"] > 0:
        v, gn = st_loss(state.noise, draw.block_size, config.st_epsilon, config.st_temperature)
        _finite("st", v, gn)
        per_term["st"] = v
        grad_n += weights["st"] * gn
    if weights["pc"] > 0:
        v, gs = pc_loss(state.signal, m_target)
        _finite("pc", v, gs)
        per_term["pc"] = v
        grad_s += weights["pc"] * gs
    if weights["tv"] > 0:
        v, gs = tv_loss(state.signal, config.tv_epsilon)
        _finite("tv", v, gs)
        per_term["tv"] = v
        grad_s += weights["tv"] * gs

    total = sum(weights[t] * v for t, v in per_term.items())
    return LossBreakdown(total=total, per_term=per_term, grad_signal=grad_s, grad_noise=grad_n)
