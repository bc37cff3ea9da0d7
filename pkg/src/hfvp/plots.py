"""Figure rendering for reports plus the static SVG overlay."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .detector import DetectionResult
from .geometry import CameraFrame
from .segments import SegmentSet

VP_COLORS = ("#d62728", "#2ca02c", "#1f77b4", "#ff7f0e", "#9467bd", "#8c564b")
ZENITH_COLOR = "#17becf"
UNASSIGNED_COLOR = "#999999"
HORIZON_COLOR = "#e377c2"
GT_COLOR = "#2f9e44"


def plot_cumulative_histogram(
    thresholds: np.ndarray,
    fractions: np.ndarray,
    auc_value: float,
    path: str | Path,
    label: str = "detector",
) -> Path:
    """Cumulative horizon-error curve with the AUC in the legend."""
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    ax.plot(thresholds, fractions, lw=2.0, label=f"{label} (AUC {100 * auc_value:.2f}%)")
    ax.set_xlabel("horizon error")
    ax.set_ylabel("fraction of images")
    ax.set_xlim(0.0, float(thresholds[-1]))
    ax.set_ylim(0.0, 1.0)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _horizon_border_points(
    coeffs: tuple[float, float, float], frame: CameraFrame
) -> tuple[tuple[float, float], tuple[float, float]] | None:
    a, b, c = coeffs
    if abs(b) <= 1e-12:
        return None
    return (0.0, -c / b), (frame.width, -(a * frame.width + c) / b)


def _segment_color(result: DetectionResult, index: int) -> str:
    if index in set(result.zenith.inlier_ids.tolist()):
        return ZENITH_COLOR
    vp = int(result.segment_vp[index]) if index < result.segment_vp.size else -1
    if vp >= 0:
        return VP_COLORS[vp % len(VP_COLORS)]
    return UNASSIGNED_COLOR


def plot_overlay(
    segs: SegmentSet,
    result: DetectionResult,
    path: str | Path,
    gt_horizon: tuple[float, float, float] | None = None,
) -> Path:
    """Matplotlib overlay: segments colored by VP, horizon, optional truth."""
    frame = segs.frame
    fig, ax = plt.subplots(figsize=(frame.width / 100.0, frame.height / 100.0))
    for i in range(len(segs)):
        u1, v1, u2, v2 = segs.endpoints[i]
        ax.plot([u1, u2], [v1, v2], color=_segment_color(result, i), lw=1.2)
    pts = _horizon_border_points(result.horizon_image, frame)
    if pts:
        ax.plot([pts[0][0], pts[1][0]], [pts[0][1], pts[1][1]], color=HORIZON_COLOR, lw=2.0)
    if gt_horizon is not None:
        pts = _horizon_border_points(gt_horizon, frame)
        if pts:
            ax.plot(
                [pts[0][0], pts[1][0]],
                [pts[0][1], pts[1][1]],
                color=GT_COLOR,
                lw=2.0,
                ls="--",
            )
    ax.set_xlim(0, frame.width)
    ax.set_ylim(frame.height, 0)
    ax.set_aspect("equal")
    ax.axis("off")
    fig.tight_layout(pad=0)
    path = Path(path)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def write_overlay_svg(
    segs: SegmentSet,
    result: DetectionResult,
    path: str | Path,
    gt_horizon: tuple[float, float, float] | None = None,
) -> Path:
    """Static SVG overlay; deterministic output for identical inputs."""
    frame = segs.frame
    w, h = frame.width, frame.height
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:g}" height="{h:g}" '
        f'viewBox="0 0 {w:g} {h:g}">',
        f'<rect width="{w:g}" height="{h:g}" fill="white"/>',
    ]
    for i in range(len(segs)):
        u1, v1, u2, v2 = segs.endpoints[i]
        color = _segment_color(result, i)
        parts.append(
            f'<line x1="{u1:.2f}" y1="{v1:.2f}" x2="{u2:.2f}" y2="{v2:.2f}" '
            f'stroke="{color}" stroke-width="1.2"/>'
        )
    pts = _horizon_border_points(result.horizon_image, frame)
    if pts:
        (x1, y1), (x2, y2) = pts
        parts.append(
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
            f'stroke="{HORIZON_COLOR}" stroke-width="2.5"/>'
        )
    if gt_horizon is not None:
        pts = _horizon_border_points(gt_horizon, frame)
        if pts:
            (x1, y1), (x2, y2) = pts
            parts.append(
                f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
                f'stroke="{GT_COLOR}" stroke-width="2.5" stroke-dasharray="8,6"/>'
            )
    parts.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return path
