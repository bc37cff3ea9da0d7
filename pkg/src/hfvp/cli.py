"""Command-line front end: detect, bench, and synth subcommands.

Exit codes: 0 success, 1 usage or validation failure, 2 runtime failure.
The HFVP_LOG environment variable sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import plots
from .detector import DetectionResult, detect
from .evaluation import DEFAULT_AUC_THRESHOLD, run_benchmark, write_report
from .geometry import CameraFrame, line_from_image, point_to_image
from .params import AlgorithmParams
from .prior import (
    fit_gaussian,
    horizon_image_line,
    load_prior,
    map_estimate,
    no_context_prior,
)
from .segments import detect_segments, load_segments, read_pgm
from .synth import export_scene, make_scene, write_scene_prior
from .zenith import ZenithResult, initial_zenith_direction

log = logging.getLogger("hfvp.cli")

ABLATIONS = ("none-full", "cnn-empty", "cnn-full")


class ValidationFailure(Exception):
    """Input validation failed; maps to exit code 1."""


class CliParser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theta-con", type=float, default=2.0, metavar="DEG",
                   help="consistency threshold (default 2)")
    p.add_argument("--theta-ver", type=float, default=10.0, metavar="DEG",
                   help="vertical-segment threshold (default 10)")
    p.add_argument("--theta-hor", type=float, default=1.5, metavar="DEG",
                   help="horizontal-segment threshold (default 1.5)")
    p.add_argument("--theta-dist", type=float, default=33.0, metavar="DEG",
                   help="minimum VP separation (default 33)")
    p.add_argument("--samples", type=int, default=300, metavar="S",
                   help="horizon candidates per image (default 300)")
    p.add_argument("--subset", type=int, default=20, metavar="M",
                   help="segments sampled per candidate (default 20)")


def _params_from_args(args) -> AlgorithmParams:
    return AlgorithmParams(
        theta_con=math.radians(args.theta_con),
        theta_ver=math.radians(args.theta_ver),
        theta_hor=math.radians(args.theta_hor),
        theta_dist=math.radians(args.theta_dist),
        n_candidates=args.samples,
        subset_size=args.subset,
    )


def _require_file(path: str | None, what: str) -> Path:
    if path is None:
        raise ValidationFailure(f"{what} is required")
    p = Path(path)
    if not p.is_file():
        raise ValidationFailure(f"{what} not found: {p}")
    return p


def _result_payload(result: DetectionResult, frame: CameraFrame, seed: int, ablation: str) -> dict:
    a, b, c = result.horizon_image
    if abs(b) > 1e-12 * math.hypot(a, b):
        y_form = {"m": float(-a / b), "b": float(-c / b)}
    else:
        y_form = None
    zen = result.zenith
    zen_image = None if zen.zenith_vp is None else point_to_image(frame, zen.zenith_vp)
    return {
        "ablation": ablation,
        "seed": seed,
        "degraded": result.degraded,
        "score": float(result.score),
        "horizon": {
            "sphere": [float(x) for x in result.horizon],
            "image": [float(x) for x in result.horizon_image],
            "y_mx_b": y_form,
            "slope_rad": float(result.param.alpha),
            "offset_px": float(result.param.offset),
        },
        "zenith": {
            "vp_sphere": None if zen.zenith_vp is None else [float(x) for x in zen.zenith_vp],
            "vp_image": None if zen_image is None else [float(x) for x in zen_image],
            "dir_sphere": [float(x) for x in zen.zenith_dir],
            "used_ransac": zen.used_ransac,
            "inlier_ids": [int(i) for i in zen.inlier_ids],
        },
        "vps": [
            {
                "sphere": [float(x) for x in vp],
                "image": (lambda q: None if q is None else [float(x) for x in q])(
                    point_to_image(frame, vp)
                ),
                "weight": float(w),
            }
            for vp, w in zip(result.vps, result.vp_weights)
        ],
        "segment_vp": [int(i) for i in result.segment_vp],
        "n_segments": int(result.segment_vp.size),
    }


def _load_gt_horizon(path: str | None) -> tuple[float, float, float] | None:
    if path is None:
        return None
    with _require_file(path, "ground-truth file").open("r", encoding="utf-8") as fh:
        gt = json.load(fh)
    return tuple(float(x) for x in gt["horizon"])


def cmd_detect(args) -> int:
    if args.image is not None:
        image = read_pgm(_require_file(args.image, "image file"))
        h, w = image.shape
        if args.width is not None and args.width != w:
            raise ValidationFailure(f"--width {args.width} does not match image width {w}")
        if args.height is not None and args.height != h:
            raise ValidationFailure(f"--height {args.height} does not match image height {h}")
        frame = CameraFrame(float(w), float(h))
        segs = detect_segments(image, frame)
    else:
        seg_path = _require_file(args.segments, "segment file")
        if args.width is None or args.height is None:
            raise ValidationFailure("--width and --height are required with --segments")
        frame = CameraFrame(float(args.width), float(args.height))
        segs = load_segments(seg_path, frame)

    if args.ablation == "none-full":
        prior = no_context_prior(frame)
    else:
        prior_path = _require_file(args.prior, f"prior file (required for {args.ablation})")
        prior = fit_gaussian(load_prior(prior_path, frame), seed=args.seed)

    params = _params_from_args(args)
    if args.ablation == "cnn-empty":
        param = map_estimate(prior)
        coeffs = horizon_image_line(frame, param)
        result = DetectionResult(
            zenith=ZenithResult(None, initial_zenith_direction(prior, frame)),
            horizon=line_from_image(frame, *coeffs),
            horizon_image=coeffs,
            param=param,
            vps=[],
            vp_weights=np.empty(0),
            segment_vp=np.full(len(segs), -1, dtype=int),
            score=0.0,
            candidate_index=-1,
            degraded=False,
        )
    else:
        result = detect(segs, prior, frame, params, args.seed)
    if result.degraded:
        log.warning("segment set empty, falling back to the prior horizon")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = _result_payload(result, frame, args.seed, args.ablation)
    result_path = out_dir / "result.json"
    with result_path.open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {result_path}")

    gt_horizon = _load_gt_horizon(args.gt)
    if args.svg:
        print(f"wrote {plots.write_overlay_svg(segs, result, out_dir / 'overlay.svg', gt_horizon)}")
    if args.plot:
        print(f"wrote {plots.plot_overlay(segs, result, out_dir / 'overlay.png', gt_horizon)}")
    return 0


def cmd_bench(args) -> int:
    dataset = Path(args.dataset)
    if not dataset.is_dir():
        raise ValidationFailure(f"dataset directory not found: {dataset}")
    report = run_benchmark(
        dataset,
        args.ablation,
        params=_params_from_args(args),
        seed=args.seed,
        auc_threshold=args.auc_threshold,
        jobs=args.jobs,
    )
    out_dir = Path(args.out)
    paths = write_report(report, out_dir)
    paths["figure"] = plots.plot_cumulative_histogram(
        report.thresholds,
        report.fractions,
        report.auc,
        out_dir / "cumulative_histogram.png",
        label=report.mode,
    )
    for p in paths.values():
        print(f"wrote {p}")
    print(
        f"mode={report.mode} n={len(report.records)} failed={len(report.failures)} "
        f"auc={report.auc:.4f} mean_runtime_s={report.mean_runtime_s:.3f}"
    )
    return 0


def cmd_synth(args) -> int:
    noises = []
    for tok in str(args.noise).split(","):
        tok = tok.strip()
        if tok:
            noises.append(float(tok))
    if not noises:
        raise ValidationFailure("--noise must name at least one noise level")
    out_root = Path(args.out)
    for level_idx, noise in enumerate(noises):
        out_dir = out_root if len(noises) == 1 else out_root / f"noise_{noise:.2f}"
        out_dir.mkdir(parents=True, exist_ok=True)
        for idx in range(args.n):
            scene = make_scene(
                n_families=args.families,
                segments_per_family=args.per_family,
                outlier_fraction=args.outlier_fraction,
                endpoint_noise_px=noise,
                fov=args.fov,
                pitch=args.pitch,
                roll=args.roll,
                seed=np.random.SeedSequence((args.seed, idx)),
                width=args.width,
                height=args.height,
                outlier_mode="adversarial" if args.adversarial else "uniform",
            )
            stem = f"scene_{idx:04d}"
            export_scene(scene, out_dir, stem)
            if args.priors:
                write_scene_prior(
                    scene,
                    out_dir / f"{stem}_prior.json",
                    sigma_offset_px=args.prior_sigma_offset,
                    sigma_alpha=math.radians(args.prior_sigma_alpha_deg),
                    seed=np.random.SeedSequence((args.seed, idx, 7)),
                )
        print(f"wrote {args.n} scenes to {out_dir}")
    return 0


def build_parser() -> CliParser:
    parser = CliParser(prog="hfvp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect the horizon and VPs in one image")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--segments", metavar="PATH", help="segment file (u1 v1 u2 v2 rows)")
    src.add_argument("--image", metavar="PATH", help="binary 8-bit PGM image")
    p.add_argument("--width", type=float, help="image width in pixels (with --segments)")
    p.add_argument("--height", type=float, help="image height in pixels (with --segments)")
    p.add_argument("--prior", metavar="PATH", help="categorical prior JSON (cnn-* ablations)")
    p.add_argument("--ablation", choices=ABLATIONS, default="none-full")
    p.add_argument("--gt", metavar="PATH", help="ground-truth JSON for overlay comparison")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".", metavar="DIR")
    p.add_argument("--svg", action="store_true", help="write overlay.svg")
    p.add_argument("--plot", action="store_true", help="write overlay.png")
    _add_param_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("bench", help="run a dataset benchmark and write reports")
    p.add_argument("--dataset", required=True, metavar="DIR")
    p.add_argument("--ablation", choices=ABLATIONS, default="none-full")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=".", metavar="DIR")
    p.add_argument("--auc-threshold", type=float, default=DEFAULT_AUC_THRESHOLD)
    _add_param_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="generate a synthetic scene suite")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--families", type=int, default=2, help="horizontal VP families")
    p.add_argument("--per-family", type=int, default=32)
    p.add_argument("--outlier-fraction", type=float, default=0.2)
    p.add_argument("--noise", default="0.5",
                   help="endpoint noise in px; comma list makes one sub-suite per level")
    p.add_argument("--priors", action="store_true",
                   help="also write per-scene prior files centered near the truth")
    p.add_argument("--prior-sigma-offset", type=float, default=5.0, metavar="PX")
    p.add_argument("--prior-sigma-alpha-deg", type=float, default=2.0, metavar="DEG")
    p.add_argument("--adversarial", action="store_true",
                   help="cluster half of the outliers on a false intersection")
    p.add_argument("--fov", type=float, help="fix the horizontal field of view (degrees)")
    p.add_argument("--pitch", type=float, help="fix the camera pitch (degrees)")
    p.add_argument("--roll", type=float, help="fix the camera roll (degrees)")
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=480)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("HFVP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse help/usage paths
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return args.func(args)
    except ValidationFailure as exc:
        print(f"hfvp: error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, ValueError) as exc:
        print(f"hfvp: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        log.exception("command failed")
        print(f"hfvp: failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
