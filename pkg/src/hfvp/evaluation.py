"""Horizon-error metric, AUC, and the benchmark harness.

The error of a detected horizon is the larger of its vertical distances to
the ground-truth line at the left and right image borders, divided by the
image height. A run over a dataset produces per-image records, the area
under the cumulative error histogram, and the histogram itself for
plotting.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .detector import detect
from .geometry import CameraFrame
from .params import AlgorithmParams
from .prior import fit_gaussian, horizon_image_line, load_prior, map_estimate, no_context_prior
from .segments import load_segments

log = logging.getLogger("hfvp.evaluation")

MODES = ("none-full", "cnn-empty", "cnn-full")
DEFAULT_AUC_THRESHOLD = 0.25
HISTOGRAM_POINTS = 512


@dataclass(frozen=True)
class ErrorRecord:
    image_id: str
    horizon_error: float
    runtime: float
    mode: str


def horizon_error(
    detected: tuple[float, float, float],
    truth: tuple[float, float, float],
    frame: CameraFrame,
) -> float:
    """Max border-evaluated vertical gap between two image lines, over height.

    For straight lines the maximum over the image's horizontal extent is
    attained at a border, so only x = 0 and x = width are evaluated. A
    vertical line has no v(x) and yields the +inf sentinel.
    """

    def v_at(line: tuple[float, float, float], x: float) -> float:
        a, b, c = line
        if abs(b) <= 1e-12 * math.hypot(a, b):
            return math.inf
        return -(a * x + c) / b

    gaps = []
    for x in (0.0, frame.width):
        vd = v_at(detected, x)
        vt = v_at(truth, x)
        if math.isinf(vd) or math.isinf(vt):
            return math.inf
        gaps.append(abs(vd - vt))
    return max(gaps) / frame.height


def auc(errors, max_threshold: float = DEFAULT_AUC_THRESHOLD) -> float:
    """Area under the cumulative error histogram on [0, max_threshold].

    Computed exactly from the staircase of sorted errors and normalized to
    [0, 1]. Infinite errors stay in the denominator but contribute nothing.
    """
    errors = np.asarray(list(errors), dtype=float)
    if errors.size == 0:
        raise ValueError("auc of an empty error list is undefined")
    if not max_threshold > 0:
        raise ValueError("max_threshold must be positive")
    finite = errors[np.isfinite(errors)]
    area = np.maximum(max_threshold - finite, 0.0).sum()
    return float(area / (errors.size * max_threshold))


def cumulative_histogram(
    errors, max_threshold: float = DEFAULT_AUC_THRESHOLD, points: int = HISTOGRAM_POINTS
) -> tuple[np.ndarray, np.ndarray]:
    """(thresholds, fraction of errors <= threshold) at uniform thresholds."""
    errors = np.asarray(list(errors), dtype=float)
    if errors.size == 0:
        raise ValueError("histogram of an empty error list is undefined")
    thresholds = np.linspace(0.0, max_threshold, points)
    fractions = (errors[None, :] <= thresholds[:, None]).mean(axis=1)
    return thresholds, fractions


@dataclass
class BenchmarkReport:
    mode: str
    records: list[ErrorRecord]
    failures: list[tuple[str, str]]
    auc: float
    auc_threshold: float
    mean_runtime_s: float
    thresholds: np.ndarray
    fractions: np.ndarray


def _evaluate_image(task) -> tuple[str, object]:
    """Worker for one image; returns ("ok", record) or ("fail", (id, msg))."""
    image_id, seg_path, gt_path, prior_path, mode, params, seed = task
    try:
        with open(gt_path, "r", encoding="utf-8") as fh:
            gt = json.load(fh)
        frame = CameraFrame(float(gt["width"]), float(gt["height"]))
        truth = tuple(float(x) for x in gt["horizon"])
        segs = load_segments(seg_path, frame)
        t0 = time.perf_counter()
        if mode == "none-full":
            result = detect(segs, no_context_prior(frame), frame, params, seed)
            detected = result.horizon_image
        else:
            if prior_path is None or not Path(prior_path).exists():
                raise FileNotFoundError(f"prior file missing for {image_id} (mode {mode})")
            cat = load_prior(prior_path, frame)
            prior = fit_gaussian(cat, seed=seed)
            if mode == "cnn-empty":
                detected = horizon_image_line(frame, map_estimate(prior))
            elif mode == "cnn-full":
                result = detect(segs, prior, frame, params, seed)
                detected = result.horizon_image
            else:
                raise ValueError(f"unknown mode {mode!r}")
        runtime = time.perf_counter() - t0
        err = horizon_error(detected, truth, frame)
        return ("ok", ErrorRecord(image_id, err, runtime, mode))
    except Exception as exc:  # one bad image must not sink the batch
        return ("fail", (image_id, f"{type(exc).__name__}: {exc}"))


def run_benchmark(
    dataset: str | Path,
    mode: str,
    params: AlgorithmParams | None = None,
    seed: int = 0,
    auc_threshold: float = DEFAULT_AUC_THRESHOLD,
    jobs: int = 1,
) -> BenchmarkReport:
    """Evaluate every ``*_gt.json`` scene in ``dataset`` under one mode.

    Each scene needs ``<id>_segments.txt`` beside its ground truth, and
    ``<id>_prior.json`` in the CNN modes. Per-image failures are collected
    and reported without aborting the run. Results are deterministic for a
    fixed seed, independent of ``jobs``.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    params = params or AlgorithmParams()
    dataset = Path(dataset)
    gt_files = sorted(dataset.glob("*_gt.json"))
    if not gt_files:
        raise ValueError(f"no *_gt.json files under {dataset}")

    tasks = []
    for idx, gt_path in enumerate(gt_files):
        image_id = gt_path.name[: -len("_gt.json")]
        seg_path = dataset / f"{image_id}_segments.txt"
        prior_path = dataset / f"{image_id}_prior.json"
        tasks.append(
            (
                image_id,
                str(seg_path),
                str(gt_path),
                str(prior_path) if mode != "none-full" else None,
                mode,
                params,
                seed + idx,
            )
        )

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_evaluate_image, tasks))
    else:
        outcomes = [_evaluate_image(t) for t in tasks]

    records: list[ErrorRecord] = []
    failures: list[tuple[str, str]] = []
    for status, payload in outcomes:
        if status == "ok":
            records.append(payload)  # type: ignore[arg-type]
        else:
            failures.append(payload)  # type: ignore[arg-type]
            log.warning("benchmark image failed: %s: %s", *payload)  # type: ignore[misc]
    if not records:
        raise ValueError(f"no image in {dataset} could be evaluated")

    errors = [r.horizon_error for r in records]
    thresholds, fractions = cumulative_histogram(errors, auc_threshold)
    return BenchmarkReport(
        mode=mode,
        records=records,
        failures=failures,
        auc=auc(errors, auc_threshold),
        auc_threshold=auc_threshold,
        mean_runtime_s=float(np.mean([r.runtime for r in records])),
        thresholds=thresholds,
        fractions=fractions,
    )


def write_report(report: BenchmarkReport, out_dir: str | Path) -> dict[str, Path]:
    """Write records CSV, summary JSON, and histogram CSV; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "records": out_dir / "records.csv",
        "summary": out_dir / "summary.json",
        "histogram": out_dir / "histogram.csv",
    }
    with paths["records"].open("w", encoding="utf-8") as fh:
        fh.write("image_id,mode,horizon_error,runtime_s\n")
        for r in report.records:
            fh.write(f"{r.image_id},{r.mode},{r.horizon_error:.9g},{r.runtime:.6f}\n")
    summary = {
        "auc": report.auc,
        "mean_runtime_s": report.mean_runtime_s,
        "n": len(report.records),
        "mode": report.mode,
        "auc_threshold": report.auc_threshold,
        "n_failed": len(report.failures),
        "failures": [{"image_id": i, "error": m} for i, m in report.failures],
    }
    with paths["summary"].open("w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with paths["histogram"].open("w", encoding="utf-8") as fh:
        fh.write("threshold,fraction\n")
        for t, f in zip(report.thresholds, report.fractions):
            fh.write(f"{t:.9g},{f:.9g}\n")
    return paths
