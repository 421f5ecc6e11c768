"""scikit-learn style wrappers around the denoisers.

Both estimators take a single 2-D grayscale image as ``X``. ``fit`` runs the
per-image work and stores results in trailing-underscore attributes;
``transform`` returns the denoised image.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_image
from .baselines import NlmParams, nlm_denoise
from .losses import LossConfig
from .metrics import psnr
from .noise import estimate_sigma
from .optimizer import OptimizerConfig, denoise
from .segmentation import SegmentationParams, felzenszwalb_segment, piecewise_target


class WhitePriorDenoiser(TransformerMixin, BaseEstimator):
    """Blind denoiser splitting an image into signal and white noise.

    Parameters mirror :class:`LossConfig`, :class:`OptimizerConfig` and
    :class:`SegmentationParams`; ``random_state`` seeds the per-step lag and
    block-size draws.

    Attributes
    ----------
    signal_, noise_ : ndarray
        Final decomposition of the fitted image (signal is not clipped).
    target_ : ndarray
        Piecewise-constant image used by the gradient-matching term.
    labels_ : SegmentationLabels
    trace_ : OptimizationTrace
    sigma_ : float
        ``std(noise_)``, the implied noise level.
    """

    def __init__(
        self,
        weight_rec=1.0,
        weight_ac=1.0,
        weight_st=1.0,
        weight_pc=1.0,
        weight_tv=5e-5,
        ac_max_lag=16,
        ac_lags_per_step=1,
        st_block_sizes=(2, 4, 8, 16),
        tv_epsilon=1e-6,
        st_epsilon=1e-8,
        st_temperature=1.0,
        learning_rate=1e-4,
        beta1=0.9,
        beta2=0.999,
        adam_epsilon=1e-8,
        iterations=3000,
        lr_halving_period=600,
        init_strategy="smoothed-split",
        k_threshold=1.2,
        min_size=20,
        presmooth_sigma=0.8,
        random_state=0,
    ):
        self.weight_rec = weight_rec
        self.weight_ac = weight_ac
        self.weight_st = weight_st
        self.weight_pc = weight_pc
        self.weight_tv = weight_tv
        self.ac_max_lag = ac_max_lag
        self.ac_lags_per_step = ac_lags_per_step
        self.st_block_sizes = st_block_sizes
        self.tv_epsilon = tv_epsilon
        self.st_epsilon = st_epsilon
        self.st_temperature = st_temperature
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.adam_epsilon = adam_epsilon
        self.iterations = iterations
        self.lr_halving_period = lr_halving_period
        self.init_strategy = init_strategy
        self.k_threshold = k_threshold
        self.min_size = min_size
        self.presmooth_sigma = presmooth_sigma
        self.random_state = random_state

    @classmethod
    def from_configs(cls, loss=None, optimizer=None, segmentation=None):
        loss = loss or LossConfig()
        optimizer = optimizer or OptimizerConfig()
        segmentation = segmentation or SegmentationParams()
        params = {k: getattr(loss, k) for k in loss.__dataclass_fields__}
        params.update({k: getattr(optimizer, k) for k in optimizer.__dataclass_fields__})
        params.update({k: getattr(segmentation, k) for k in segmentation.__dataclass_fields__})
        params["random_state"] = params.pop("seed")
        return cls(**params)

    def loss_config(self):
        return LossConfig(
            weight_rec=self.weight_rec,
            weight_ac=self.weight_ac,
            weight_st=self.weight_st,
            weight_pc=self.weight_pc,
            weight_tv=self.weight_tv,
            ac_max_lag=self.ac_max_lag,
            ac_lags_per_step=self.ac_lags_per_step,
            st_block_sizes=tuple(self.st_block_sizes),
            tv_epsilon=self.tv_epsilon,
            st_epsilon=self.st_epsilon,
            st_temperature=self.st_temperature,
        )

    def optimizer_config(self):
        return OptimizerConfig(
            learning_rate=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
            adam_epsilon=self.adam_epsilon,
            iterations=self.iterations,
            lr_halving_period=self.lr_halving_period,
            seed=self.random_state,
            init_strategy=self.init_strategy,
        )

    def segmentation_params(self):
        return SegmentationParams(
            k_threshold=self.k_threshold,
            min_size=self.min_size,
            presmooth_sigma=self.presmooth_sigma,
        )

    def _decompose(self, X):
        labels = felzenszwalb_segment(X, self.segmentation_params())
        target = piecewise_target(X, labels)
        state, trace = denoise(X, self.loss_config(), self.optimizer_config(), target)
        return labels, target, state, trace

    def fit(self, X, y=None):
        X = check_image(X, name="X", copy=True)
        self.labels_, self.target_, state, self.trace_ = self._decompose(X)
        self.signal_ = state.signal
        self.noise_ = state.noise
        self.sigma_ = float(np.std(state.noise))
        self._fit_input = X
        return self

    def transform(self, X):
        """Signal estimate for ``X``; re-optimises unless ``X`` is the fitted image."""
        check_is_fitted(self, "signal_")
        X = check_image(X, name="X")
        if X.shape == self._fit_input.shape and np.array_equal(X, self._fit_input):
            return self.signal_.copy()
        return self._decompose(X)[2].signal

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X).signal_.copy()

    def score(self, X, y):
        """PSNR (dB, peak 1) of the clipped signal estimate against clean ``y``."""
        return psnr(np.clip(self.transform(X), 0.0, 1.0), check_image(y, name="y"))


class NLMDenoiser(TransformerMixin, BaseEstimator):
    """Non-local means with a blindly estimated noise level.

    ``fit`` estimates ``sigma_`` from ``X`` unless ``sigma`` is given; the
    same level is then used by ``transform``.
    """

    def __init__(self, patch_radius=3, search_radius=10, sigma=None, filter_h=None):
        self.patch_radius = patch_radius
        self.search_radius = search_radius
        self.sigma = sigma
        self.filter_h = filter_h

    def fit(self, X, y=None):
        X = check_image(X, name="X", min_shape=(3, 3))
        self.sigma_ = estimate_sigma(X) if self.sigma is None else float(self.sigma)
        return self

    def transform(self, X):
        check_is_fitted(self, "sigma_")
        params = NlmParams(
            patch_radius=self.patch_radius,
            search_radius=self.search_radius,
            sigma=self.sigma_,
            filter_h=self.filter_h,
        )
        return nlm_denoise(X, params)

    def score(self, X, y):
        return psnr(self.transform(X), check_image(y, name="y"))
