"""Blind single-image denoising by splitting an observation into a signal
estimate and a white, stationary noise estimate."""

from .baselines import NlmParams, nlm_denoise
from .estimators import NLMDenoiser, WhitePriorDenoiser
from .imagegrid import (
    contrast_stretch,
    forward_diff_x,
    forward_diff_y,
    load_pgm,
    save_pgm,
)
from .losses import (
    DecompositionState,
    LossBreakdown,
    LossConfig,
    NonFiniteLossError,
    StochasticDraw,
    ac_loss,
    pc_loss,
    rec_loss,
    st_loss,
    total_loss,
    tv_loss,
)
from .metrics import SsimParams, TTestResult, paired_t_test, psnr, ssim
from .noise import NoiseModel, PhantomSpec, add_awgn, estimate_sigma, generate_phantom
from .optimizer import OptimizerConfig, OptimizationTrace, adam_step, denoise, init_state
from .segmentation import (
    SegmentationLabels,
    SegmentationParams,
    felzenszwalb_segment,
    piecewise_target,
)

__version__ = "0.1.0"

__all__ = [
    "DecompositionState",
    "LossBreakdown",
    "LossConfig",
    "NLMDenoiser",
    "NlmParams",
    "NoiseModel",
    "NonFiniteLossError",
    "OptimizationTrace",
    "OptimizerConfig",
    "PhantomSpec",
    "SegmentationLabels",
    "SegmentationParams",
    "SsimParams",
    "StochasticDraw",
    "TTestResult",
    "WhitePriorDenoiser",
    "ac_loss",
    "adam_step",
    "add_awgn",
    "contrast_stretch",
    "denoise",
    "estimate_sigma",
    "felzenszwalb_segment",
    "forward_diff_x",
    "forward_diff_y",
    "generate_phantom",
    "init_state",
    "load_pgm",
    "nlm_denoise",
    "paired_t_test",
    "pc_loss",
    "piecewise_target",
    "psnr",
    "rec_loss",
    "save_pgm",
    "ssim",
    "st_loss",
    "total_loss",
    "tv_loss",
]
