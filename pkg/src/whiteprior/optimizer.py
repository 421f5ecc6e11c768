"""Per-image Adam optimisation of the (signal, noise) decomposition."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_image, check_same_shape
from .imagegrid import box_blur3
from .losses import TERMS, DecompositionState, NonFiniteLossError, draw_stochastic, total_loss
from .noise import make_rng

INIT_STRATEGIES = ("observation-signal", "smoothed-split")


@dataclass(frozen=True)
class OptimizerConfig:
    """Adam hyper-parameters and the step-halving schedule.

    ``learning_rate`` and the betas default to the reference training setup;
    the halving period is expressed in iterations.
    """

    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    iterations: int = 3000
    lr_halving_period: int = 600
    seed: int = 0
    init_strategy: str = "smoothed-split"

    def __post_init__(self):
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if not self.adam_epsilon > 0:
            raise ValueError("adam_epsilon must be positive")
        if int(self.iterations) < 1 or int(self.lr_halving_period) < 1:
            raise ValueError("iterations and lr_halving_period must be >= 1")
        if self.init_strategy not in INIT_STRATEGIES:
            raise ValueError(f"init_strategy must be one of {INIT_STRATEGIES}")

    def lr_at(self, iteration):
        return math.ldexp(self.learning_rate, -(int(iteration) // int(self.lr_halving_period)))


@dataclass
class AdamMoments:
    m_signal: np.ndarray
    v_signal: np.ndarray
    m_noise: np.ndarray
    v_noise: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, shape):
        return cls(*(np.zeros(shape) for _ in range(4)), t=0)


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    lr: float
    total: float
    per_term: dict
    lags: tuple
    block_size: int


@dataclass
class OptimizationTrace:
    records: list = field(default_factory=list)
    final_state: DecompositionState = None

    def losses(self):
        return np.array([r.total for r in self.records])

    def to_csv(self, path=None):
        """Write (iter, lr, total, rec, ac, st, pc, tv); disabled terms are blank."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iter", "lr", "total", *TERMS])
        for r in self.records:
            writer.writerow(
                [r.iteration, repr(r.lr), repr(r.total)]
                + [repr(r.per_term[t]) if t in r.per_term else "" for t in TERMS]
            )
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def init_state(x, strategy="smoothed-split"):
    """Starting decomposition: ``(x, 0)`` or a 3x3 box blur and its residual."""
    x = check_image(x, name="x")
    if strategy == "observation-signal":
        return DecompositionState(signal=x.copy(), noise=np.zeros_like(x))
    if strategy == "smoothed-split":
        s = box_blur3(x)
        return DecompositionState(signal=s, noise=x - s)
    raise ValueError(f"unknown init strategy {strategy!r}")


def _adam_update(param, grad, m, v, config, lr_now, t):
    m = config.beta1 * m + (1.0 - config.beta1) * grad
    v = config.beta2 * v + (1.0 - config.beta2) * (grad * grad)
    m_hat = m / (1.0 - config.beta1**t)
    v_hat = v / (1.0 - config.beta2**t)
    return param - lr_now * m_hat / (np.sqrt(v_hat) + config.adam_epsilon), m, v


def adam_step(state, grads, moments, config, lr_now):
    """One bias-corrected Adam update applied pixel-wise to signal and noise."""
    grad_s, grad_n = grads
    check_same_shape(state.signal, grad_s, ("signal", "grad_signal"))
    check_same_shape(state.noise, grad_n, ("noise", "grad_noise"))
    if not lr_now > 0:
        raise ValueError(f"lr_now must be positive, got {lr_now}")
    for name, g in (("signal", grad_s), ("noise", grad_n)):
        if not np.all(np.isfinite(g)):
            raise NonFiniteLossError(name, f"non-finite gradient for the {name} grid")
    t = moments.t + 1
    s, ms, vs = _adam_update(state.signal, grad_s, moments.m_signal, moments.v_signal, config, lr_now, t)
    n, mn, vn = _adam_update(state.noise, grad_n, moments.m_noise, moments.v_noise, config, lr_now, t)
    return DecompositionState(signal=s, noise=n), AdamMoments(ms, vs, mn, vn, t)


def denoise(x, loss_config, opt_config, m_target, initial_state=None):
    """Jointly optimise signal and noise for one observation.

    Each iteration draws fresh lags and a block size from a stream seeded by
    ``opt_config.seed``, evaluates the composite loss and takes one Adam
    step. The run is a pure function of its arguments.

    Raises
    ------
    NonFiniteLossError
        With ``.trace`` holding every record completed before the failure.
    """
    x = check_image(x, name="x")
    m_target = check_image(m_target, name="m_target")
    check_same_shape(x, m_target, ("x", "m_target"))
    state = initial_state or init_state(x, opt_config.init_strategy)
    moments = AdamMoments.zeros(x.shape)
    rng = make_rng(opt_config.seed, "stochastic-draws")
    trace = OptimizationTrace()

    for it in range(int(opt_config.iterations)):
        draw = draw_stochastic(loss_config, x.shape, rng)
        lr_now = opt_config.lr_at(it)
        try:
            breakdown = total_loss(x, state, m_target, loss_config, draw)
            if not math.isfinite(breakdown.total):
                raise NonFiniteLossError("total")
            trace.records.append(
                TraceRecord(it, lr_now, breakdown.total, breakdown.per_term, draw.lags, draw.block_size)
            )
            state, moments = adam_step(
                state, (breakdown.grad_signal, breakdown.grad_noise), moments, opt_config, lr_now
            )
        except NonFiniteLossError as exc:
            trace.final_state = state
            exc.trace = trace
            raise NonFiniteLossError(
                exc.term, f"iteration {it}: {exc}", trace=trace
            ) from exc

    trace.final_state = state
    return state, trace
