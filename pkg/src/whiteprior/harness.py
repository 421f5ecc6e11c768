"""Benchmark driver: corpus ingestion, method grid, metrics and report files."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baselines import NlmParams, nlm_denoise
from .imagegrid import load_pgm
from .losses import TERMS, LossConfig
from .metrics import DegenerateTestError, paired_t_test, psnr, ssim
from .noise import (
    NoiseModel,
    PhantomBatch,
    PhantomSpec,
    add_awgn,
    estimate_sigma,
    generate_phantom,
)
from .optimizer import OptimizerConfig, denoise
from .segmentation import SegmentationParams, felzenszwalb_segment, piecewise_target

log = logging.getLogger(__name__)

ABLATION_NAMES = ("rec+pc", "rec+pc+tv", "rec+pc+tv+ac", "rec+pc+tv+st", "full")
SIGMA_SCALE = 255.0

CSV_COLUMNS = (
    "kind", "image", "sigma", "method", "seed", "status",
    "psnr", "ssim", "sigma_hat",
    *(f"loss_{t}" for t in TERMS),
    "n", "psnr_mean", "psnr_std", "ssim_mean", "ssim_std",
    "method_b", "t_statistic", "p_value", "df", "psnr_mean_diff",
    "error",
)  # fmt: skip


def ablation_grid(base):
    """The five loss-term subsets, from rec+pc up to the full ``base``."""
    return [
        base.with_weights(ac=0.0, st=0.0, tv=0.0),
        base.with_weights(ac=0.0, st=0.0),
        base.with_weights(st=0.0),
        base.with_weights(ac=0.0),
        base,
    ]


@dataclass(frozen=True)
class MethodSpec:
    name: str
    kind: str  # "whiteprior" or "nlm"
    loss: LossConfig = field(default_factory=LossConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    segmentation: SegmentationParams = field(default_factory=SegmentationParams)
    nlm: NlmParams = field(default_factory=NlmParams)


@dataclass(frozen=True)
class CorpusImage:
    name: str
    path: str | None = None
    phantom: dict | None = None

    def load(self):
        if self.path is not None:
            return load_pgm(self.path)
        return generate_phantom(PhantomSpec(**self.phantom))


@dataclass
class ExperimentConfig:
    corpus: list
    sigmas: list  # on the [0, 1] scale
    methods: list
    seeds: list
    output_dir: str | None = None
    workers: int = 1

    def __post_init__(self):
        for name in ("corpus", "sigmas", "methods", "seeds"):
            if not getattr(self, name):
                raise ValueError(f"experiment {name} must be non-empty")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise ValueError(f"method names must be unique, got {names}")
        if any(not s > 0 for s in self.sigmas):
            raise ValueError("sigmas must be positive")

    @classmethod
    def from_dict(cls, doc, base_dir="."):
        """Build a config from its JSON form; sigmas there are on the 8-bit scale."""
        corpus = _parse_corpus(doc.get("corpus"), Path(base_dir))
        methods = []
        for entry in doc.get("methods", []):
            methods.extend(_parse_method(entry))
        return cls(
            corpus=corpus,
            sigmas=[float(s) / SIGMA_SCALE for s in doc.get("sigmas", [])],
            methods=methods,
            seeds=[int(s) for s in doc.get("seeds", [0])],
            output_dir=doc.get("output_dir"),
            workers=int(doc.get("workers", 1)),
        )

    @classmethod
    def from_json(cls, path):
        path = Path(path)
        with open(path) as fh:
            doc = json.load(fh)
        return cls.from_dict(doc, base_dir=path.parent)


def _parse_corpus(doc, base_dir):
    if not doc:
        raise ValueError("experiment corpus must be given")
    if "directory" in doc:
        root = Path(doc["directory"])
        if not root.is_absolute():
            root = base_dir / root
        if not root.is_dir():
            raise ValueError(f"corpus directory {root} does not exist")
        files = sorted(p for p in root.iterdir() if p.suffix.lower() == ".pgm")
        return [CorpusImage(name=p.name, path=str(p)) for p in files]
    if "phantoms" in doc:
        batch = PhantomBatch(**doc["phantoms"])
        return [
            CorpusImage(name=f"phantom_{spec.seed:04d}", phantom=asdict(spec))
            for spec in batch.specs()
        ]
    raise ValueError("corpus needs either 'directory' or 'phantoms'")


def _parse_method(entry):
    kind = entry.get("type", "whiteprior")
    name = entry.get("name", kind)
    if kind == "nlm":
        params = dict(entry.get("params", {}))
        if params.get("sigma") is not None:
            params["sigma"] = float(params["sigma"]) / SIGMA_SCALE
        return [MethodSpec(name=name, kind="nlm", nlm=NlmParams(**params))]
    if kind not in ("whiteprior", "whiteprior-ablation"):
        raise ValueError(f"unknown method type {kind!r}")
    loss = LossConfig(**_tupled(entry.get("loss", {})))
    opt = OptimizerConfig(**entry.get("optimizer", {}))
    seg = SegmentationParams(**entry.get("segmentation", {}))
    if kind == "whiteprior":
        return [MethodSpec(name=name, kind="whiteprior", loss=loss, optimizer=opt, segmentation=seg)]
    prefix = entry.get("name", "")
    return [
        MethodSpec(name=f"{prefix}{label}" if prefix else label, kind="whiteprior",
                   loss=cfg, optimizer=opt, segmentation=seg)
        for label, cfg in zip(ABLATION_NAMES, ablation_grid(loss))
    ]  # fmt: skip


def _tupled(d):
    return {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}


def noise_seed(image_name, seed):
    """Per-(image, seed) noise seed so corpus images get distinct realisations."""
    return zlib.crc32(f"{image_name}\0{seed}".encode("utf-8"))


def run_method(method, noisy, seed):
    """Denoise ``noisy``; return the estimate and the final per-term losses."""
    if method.kind == "nlm":
        return nlm_denoise(noisy, method.nlm), {}
    labels = felzenszwalb_segment(noisy, method.segmentation)
    target = piecewise_target(noisy, labels)
    opt = OptimizerConfig(**{**asdict(method.optimizer), "seed": seed})
    state, trace = denoise(noisy, method.loss, opt, target)
    return np.clip(state.signal, 0.0, 1.0), dict(trace.records[-1].per_term)


def _run_cell(job):
    image, sigma, method, seed = job
    row = {"kind": "data", "image": image.name, "sigma": sigma * SIGMA_SCALE,
           "method": method.name, "seed": seed}  # fmt: skip
    start = time.perf_counter()
    try:
        clean = image.load()
        noisy = add_awgn(clean, NoiseModel(sigma, noise_seed(image.name, seed)))
        estimate, losses = run_method(method, noisy, seed)
        row.update(
            status="ok",
            psnr=psnr(estimate, clean),
            ssim=ssim(estimate, clean),
            sigma_hat=estimate_sigma(noisy) * SIGMA_SCALE,
            **{f"loss_{t}": v for t, v in losses.items()},
        )
    except Exception as exc:  # isolate per-image failures from the batch
        log.warning("cell %s/%s/%s/%s failed: %s", image.name, sigma, method.name, seed, exc)
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    row["runtime"] = time.perf_counter() - start
    return row


@dataclass
class BenchmarkReport:
    rows: list
    aggregates: list
    ttests: list

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, extrasaction="ignore",
                                lineterminator="\n")  # fmt: skip
        writer.writeheader()
        for row in [*self.rows, *self.aggregates, *self.ttests]:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
        return buf.getvalue()

    def to_json_dict(self):
        by_method = {}
        for row in self.rows:
            by_method.setdefault(row["method"], []).append(_json_row(row))
        return {
            "methods": by_method,
            "aggregates": [_json_row(r) for r in self.aggregates],
            "ttests": [_json_row(r) for r in self.ttests],
        }

    def write(self, output_dir):
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(self.to_csv())
        with open(out / "report.json", "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")
        return out / "report.csv", out / "report.json"


def _fmt(value):
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return value


def _json_row(row):
    return {k: (_fmt(v) if isinstance(v, float) and not math.isfinite(v) else v)
            for k, v in row.items()}  # fmt: skip


def _aggregate(rows, sigmas, methods):
    aggregates = []
    for sigma in sigmas:
        for method in methods:
            ok = [r for r in rows if r["sigma"] == sigma * SIGMA_SCALE
                  and r["method"] == method.name and r["status"] == "ok"]  # fmt: skip
            agg = {"kind": "aggregate", "sigma": sigma * SIGMA_SCALE, "method": method.name,
                   "n": len(ok)}  # fmt: skip
            if ok:
                p = np.array([r["psnr"] for r in ok])
                s = np.array([r["ssim"] for r in ok])
                agg.update(
                    psnr_mean=float(np.mean(p)),
                    psnr_std=float(np.std(p)) if np.all(np.isfinite(p)) else None,
                    ssim_mean=float(np.mean(s)),
                    ssim_std=float(np.std(s)),
                )
            aggregates.append(agg)
    return aggregates


def _pairwise_tests(rows, sigmas, methods):
    tests = []
    for sigma in sigmas:
        table = {}
        for r in rows:
            if r["sigma"] == sigma * SIGMA_SCALE and r["status"] == "ok":
                table[(r["method"], r["image"], r["seed"])] = r["psnr"]
        for i, a in enumerate(methods):
            for b in methods[i + 1 :]:
                keys = sorted({(im, sd) for (m, im, sd) in table if m == a.name}
                              & {(im, sd) for (m, im, sd) in table if m == b.name})  # fmt: skip
                pa = [table[(a.name, *k)] for k in keys]
                pb = [table[(b.name, *k)] for k in keys]
                test = {"kind": "ttest", "sigma": sigma * SIGMA_SCALE, "method": a.name,
                        "method_b": b.name, "n": len(keys)}  # fmt: skip
                try:
                    if not all(map(math.isfinite, pa + pb)):
                        raise DegenerateTestError("infinite PSNR in paired scores")
                    res = paired_t_test(pa, pb)
                    test.update(status="ok", t_statistic=res.t_statistic, p_value=res.p_value,
                                df=res.degrees_of_freedom,
                                psnr_mean_diff=float(np.mean(pa) - np.mean(pb)))  # fmt: skip
                except ValueError as exc:
                    test.update(status="degenerate", error=str(exc))
                tests.append(test)
    return tests


def run_benchmark(config, output_dir=None):
    """Run every (image, sigma, method, seed) cell and assemble the report.

    Rows come out sorted by (image, sigma, method order, seed) whatever the
    execution order. Report files are written when an output directory is
    given here or in ``config``.
    """
    if not config.corpus:
        raise ValueError("experiment corpus is empty")
    method_rank = {m.name: i for i, m in enumerate(config.methods)}
    jobs = [
        (image, sigma, method, seed)
        for image in sorted(config.corpus, key=lambda im: im.name)
        for sigma in sorted(config.sigmas)
        for method in config.methods
        for seed in sorted(config.seeds)
    ]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(_run_cell, jobs))
    else:
        rows = [_run_cell(job) for job in jobs]
    rows.sort(key=lambda r: (r["image"], r["sigma"], method_rank[r["method"]], r["seed"]))
    sigmas = sorted(config.sigmas)
    report = BenchmarkReport(
        rows=rows,
        aggregates=_aggregate(rows, sigmas, config.methods),
        ttests=_pairwise_tests(rows, sigmas, config.methods),
    )
    target = output_dir or config.output_dir
    if target is not None:
        report.write(target)
    return report
