"""Command-line entry point (``whiteprior`` / ``python -m whiteprior``)."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .baselines import NlmParams, nlm_denoise
from .harness import SIGMA_SCALE, ExperimentConfig, run_benchmark
from .imagegrid import PGMError, contrast_stretch, load_pgm, save_pgm
from .losses import LossConfig
from .metrics import psnr, ssim
from .noise import NoiseModel, PhantomSpec, add_awgn, estimate_sigma, generate_phantom
from .optimizer import OptimizerConfig, denoise
from .segmentation import SegmentationParams, felzenszwalb_segment, piecewise_target


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _lists_to_tuples(d):
    return {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}


def cmd_synthesize(args):
    clean = load_pgm(args.inp)
    noisy = add_awgn(clean, NoiseModel(args.sigma / SIGMA_SCALE, args.seed))
    # PGM cannot hold values outside [0, 1]; only the exported file is clipped
    save_pgm(np.clip(noisy, 0.0, 1.0), args.out, args.maxval)


def cmd_denoise(args):
    x = load_pgm(args.inp)
    doc = _read_json(args.config) if args.config else {}
    loss = LossConfig(**_lists_to_tuples(doc.get("loss", {})))
    opt = OptimizerConfig(**doc.get("optimizer", {}))
    seg = SegmentationParams(**doc.get("segmentation", {}))
    target = piecewise_target(x, felzenszwalb_segment(x, seg))
    state, trace = denoise(x, loss, opt, target)
    save_pgm(np.clip(state.signal, 0.0, 1.0), args.out_signal, args.maxval)
    save_pgm(contrast_stretch(state.noise), args.out_noise, args.maxval)
    if args.trace:
        trace.to_csv(args.trace)
    print(f"final loss {trace.records[-1].total:.6g} after {len(trace.records)} iterations")


def cmd_estimate_noise(args):
    print(f"{estimate_sigma(load_pgm(args.inp)) * SIGMA_SCALE:.4f}")


def cmd_segment(args):
    x = load_pgm(args.inp)
    defaults = SegmentationParams()
    params = SegmentationParams(
        k_threshold=defaults.k_threshold if args.k is None else args.k,
        min_size=defaults.min_size if args.min_size is None else args.min_size,
        presmooth_sigma=defaults.presmooth_sigma if args.presmooth is None else args.presmooth,
    )
    labels = felzenszwalb_segment(x, params)
    save_pgm(piecewise_target(x, labels), args.out, args.maxval)
    print(f"{labels.cluster_count} clusters")


def cmd_metrics(args):
    a, b = load_pgm(args.a), load_pgm(args.b)
    print(f"PSNR {psnr(a, b):.4f} dB")
    print(f"SSIM {ssim(a, b):.6f}")


def cmd_nlm(args):
    x = load_pgm(args.inp)
    sigma = None if args.sigma is None else args.sigma / SIGMA_SCALE
    params = NlmParams(patch_radius=args.patch_radius, search_radius=args.search_radius, sigma=sigma)
    save_pgm(np.clip(nlm_denoise(x, params), 0.0, 1.0), args.out, args.maxval)


def cmd_phantom(args):
    spec = PhantomSpec(**_lists_to_tuples(_read_json(args.spec)))
    save_pgm(generate_phantom(spec), args.out, args.maxval)


def cmd_benchmark(args):
    config = ExperimentConfig.from_json(args.config)
    if args.workers is not None:
        config.workers = args.workers
    report = run_benchmark(config, output_dir=args.out)
    failed = sum(r["status"] != "ok" for r in report.rows)
    print(f"{len(report.rows)} rows ({failed} failed) written to {args.out}")
    for agg in report.aggregates:
        if "psnr_mean" in agg:
            print(f"  sigma {agg['sigma']:g}  {agg['method']:<16} PSNR {agg['psnr_mean']:.3f} dB"
                  f"  SSIM {agg['ssim_mean']:.4f}  (n={agg['n']})")  # fmt: skip


def build_parser():
    parser = argparse.ArgumentParser(prog="whiteprior", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.set_defaults(func=func)
        return p

    p = add("synthesize", cmd_synthesize, "add white Gaussian noise to a clean image")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--sigma", type=float, required=True, help="noise std on the 0-255 scale")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("denoise", cmd_denoise, "split an image into signal and noise")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--config", help="JSON with optional 'loss', 'optimizer', 'segmentation' sections")
    p.add_argument("--out-signal", required=True)
    p.add_argument("--out-noise", required=True, help="contrast-stretched noise estimate")
    p.add_argument("--trace", help="per-iteration CSV")

    p = add("estimate-noise", cmd_estimate_noise, "print the blind noise std (0-255 scale)")
    p.add_argument("--in", dest="inp", required=True)

    p = add("segment", cmd_segment, "write the piecewise-constant target image")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--k", type=float)
    p.add_argument("--min-size", type=int)
    p.add_argument("--presmooth", type=float)
    p.add_argument("--out", required=True)

    p = add("metrics", cmd_metrics, "PSNR and SSIM between two images")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)

    p = add("nlm", cmd_nlm, "non-local means baseline")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--sigma", type=float, help="noise std on the 0-255 scale; estimated if omitted")
    p.add_argument("--patch-radius", type=int, default=3)
    p.add_argument("--search-radius", type=int, default=10)
    p.add_argument("--out", required=True)

    p = add("phantom", cmd_phantom, "generate a piecewise-constant Voronoi phantom")
    p.add_argument("--spec", required=True, help="JSON with PhantomSpec fields")
    p.add_argument("--out", required=True)

    p = add("benchmark", cmd_benchmark, "run an experiment grid and write report.csv/json")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int)

    for action in sub.choices.values():
        if any(a.dest == "out" or a.dest.startswith("out_") for a in action._actions):
            action.add_argument("--maxval", type=int, default=255, choices=(255, 65535))
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")  # fmt: skip
    try:
        args.func(args)
    except (OSError, PGMError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
