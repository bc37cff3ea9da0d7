"""Line-segment data model, file ingestion, and a minimal detector.

Segment files are UTF-8 text with one segment per line, four whitespace
separated decimals ``u1 v1 u2 v2`` in pixel coordinates (origin top-left,
v downward). Lines starting with ``#`` are ignored. Raster input is 8-bit
binary PGM (P5).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .geometry import (
    CameraFrame,
    SphereLine,
    lift_points,
    line_image_orientation,
    orientation_difference,
)

log = logging.getLogger("hfvp.segments")

MIN_DETECT_LENGTH = 20.0


class SegmentFileError(ValueError):
    """Malformed segment file; the message names the offending row."""


@dataclass(frozen=True)
class LineSegment:
    """One image segment with its precomputed homogeneous line."""

    endpoints: tuple[tuple[float, float], tuple[float, float]]
    homo_line: SphereLine
    length: float


class SegmentSet:
    """Immutable collection of segments over one camera frame.

    Internally array-backed: ``endpoints`` is (N, 4) as u1,v1,u2,v2,
    ``lines`` is (N, 3) unit plane normals, ``lengths`` is (N,), and
    ``ids`` maps each row back to its index in the originally loaded set
    (filtering preserves ids).
    """

    def __init__(self, frame: CameraFrame, endpoints: np.ndarray, ids: np.ndarray | None = None):
        endpoints = np.asarray(endpoints, dtype=float).reshape(-1, 4)
        self.frame = frame
        self.endpoints = endpoints
        n = endpoints.shape[0]
        self.ids = np.arange(n) if ids is None else np.asarray(ids, dtype=int)
        d = endpoints[:, 2:] - endpoints[:, :2]
        self.lengths = np.hypot(d[:, 0], d[:, 1])
        if n:
            p1 = lift_points(frame, endpoints[:, :2])
            p2 = lift_points(frame, endpoints[:, 2:])
            lines = np.cross(p1, p2)
            norms = np.linalg.norm(lines, axis=1)
            if np.any(norms <= 1e-12):
                bad = int(np.argmin(norms))
                raise ValueError(f"degenerate segment at row {bad}: {endpoints[bad]}")
            lines /= norms[:, None]
            # canonical sign: non-negative z, ties to y then x
            flip = (lines[:, 2] < 0) | (
                (lines[:, 2] == 0) & ((lines[:, 1] < 0) | ((lines[:, 1] == 0) & (lines[:, 0] < 0)))
            )
            lines[flip] *= -1.0
            self.lines = lines
        else:
            self.lines = np.empty((0, 3))
        self.endpoints.setflags(write=False)
        self.lines.setflags(write=False)
        self.lengths.setflags(write=False)
        self.ids.setflags(write=False)

    def __len__(self) -> int:
        return self.endpoints.shape[0]

    @property
    def orientations(self) -> np.ndarray:
        """Image direction angle of each segment, folded into [0, pi)."""
        d = self.endpoints[:, 2:] - self.endpoints[:, :2]
        return np.mod(np.arctan2(d[:, 1], d[:, 0]), np.pi)

    def segment(self, i: int) -> LineSegment:
        u1, v1, u2, v2 = self.endpoints[i]
        return LineSegment(((u1, v1), (u2, v2)), self.lines[i], float(self.lengths[i]))

    @property
    def segments(self) -> list[LineSegment]:
        return [self.segment(i) for i in range(len(self))]

    def subset(self, mask: np.ndarray) -> "SegmentSet":
        sub = SegmentSet.__new__(SegmentSet)
        sub.frame = self.frame
        sub.endpoints = self.endpoints[mask]
        sub.lines = self.lines[mask]
        sub.lengths = self.lengths[mask]
        sub.ids = self.ids[mask]
        return sub


def _clamp_endpoints(frame: CameraFrame, rows: np.ndarray) -> np.ndarray:
    rows = rows.copy()
    rows[:, 0::2] = np.clip(rows[:, 0::2], 0.0, frame.width)
    rows[:, 1::2] = np.clip(rows[:, 1::2], 0.0, frame.height)
    return rows


def load_segments(path: str | Path, frame: CameraFrame) -> SegmentSet:
    """Parse a segment file into a SegmentSet.

    Endpoints are clamped to the frame on ingest. Malformed rows and rows
    that collapse to zero length raise :class:`SegmentFileError` naming the
    1-based file line. An empty file yields a valid empty set.
    """
    path = Path(path)
    rows = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 4:
                raise SegmentFileError(f"{path}:{lineno}: expected 4 values, got {len(parts)}")
            try:
                vals = [float(p) for p in parts]
            except ValueError as exc:
                raise SegmentFileError(f"{path}:{lineno}: {exc}") from exc
            if not all(np.isfinite(vals)):
                raise SegmentFileError(f"{path}:{lineno}: non-finite coordinate")
            rows.append((lineno, vals))
    if not rows:
        return SegmentSet(frame, np.empty((0, 4)))
    arr = _clamp_endpoints(frame, np.array([v for _, v in rows], dtype=float))
    lengths = np.hypot(arr[:, 2] - arr[:, 0], arr[:, 3] - arr[:, 1])
    if np.any(lengths <= 0):
        bad = int(np.argmin(lengths))
        raise SegmentFileError(f"{path}:{rows[bad][0]}: zero-length segment after clamping")
    return SegmentSet(frame, arr)


def save_segments(path: str | Path, endpoints: np.ndarray) -> None:
    """Write (N, 4) endpoint rows in the segment file format."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("# u1 v1 u2 v2\n")
        for u1, v1, u2, v2 in np.asarray(endpoints, dtype=float):
            fh.write(f"{u1:.6f} {v1:.6f} {u2:.6f} {v2:.6f}\n")


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary 8-bit PGM (P5) image as a (H, W) uint8 array."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: unsupported raster format (binary P5 required)")
    # header = magic, width, height, maxval; '#' comments allowed
    tokens: list[bytes] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    width, height, maxval = (int(t) for t in tokens)
    if maxval <= 0 or maxval > 255:
        raise ValueError(f"{path}: unsupported raster format (maxval {maxval})")
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    if pixels.size != width * height:
        raise ValueError(f"{path}: truncated pixel data")
    return pixels.reshape(height, width).copy()


def write_pgm(path: str | Path, image: np.ndarray) -> None:
    image = np.asarray(image)
    if image.dtype != np.uint8:
        image = np.clip(image, 0, 255).astype(np.uint8)
    h, w = image.shape
    with Path(path).open("wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(image.tobytes())


def _otsu_threshold(values: np.ndarray) -> float:
    """Otsu's between-class-variance threshold over a 256-bin histogram."""
    hist, edges = np.histogram(values, bins=256)
    total = hist.sum()
    if total == 0:
        return 0.0
    centers = 0.5 * (edges[:-1] + edges[1:])
    w0 = np.cumsum(hist)
    w1 = total - w0
    sum0 = np.cumsum(hist * centers)
    mu0 = np.divide(sum0, w0, out=np.zeros_like(sum0), where=w0 > 0)
    mu1 = np.divide(sum0[-1] - sum0, w1, out=np.zeros_like(sum0), where=w1 > 0)
    var_between = w0 * w1 * (mu0 - mu1) ** 2
    return float(centers[int(np.argmax(var_between))])


def _fit_component(ys: np.ndarray, xs: np.ndarray) -> tuple[np.ndarray, float, float] | None:
    """PCA line fit of component pixels -> (endpoints row, length, rms residual)."""
    pts = np.stack([xs, ys], axis=1).astype(float)
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered / pts.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    axis = evecs[:, 1]  # largest eigenvalue last in eigh
    t = centered @ axis
    rms = float(np.sqrt(max(evals[0], 0.0)))
    p0 = centroid + t.min() * axis
    p1 = centroid + t.max() * axis
    length = float(t.max() - t.min())
    if length <= 0:
        return None
    # stable endpoint order: smaller (u, v) first
    if (p1[0], p1[1]) < (p0[0], p0[1]):
        p0, p1 = p1, p0
    return np.array([p0[0], p0[1], p1[0], p1[1]]), length, rms


def _point_segment_distance(point: np.ndarray, seg: np.ndarray) -> float:
    a = seg[:2]
    b = seg[2:]
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0 else float(np.clip((point - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(point - (a + t * ab)))


def detect_segments(
    image: np.ndarray,
    frame: CameraFrame,
    min_length: float = MIN_DETECT_LENGTH,
    max_residual: float = 2.0,
) -> SegmentSet:
    """Minimal straight-segment detector for grayscale rasters.

    Gaussian-derivative gradients are thresholded at the Otsu level, pixels
    are grouped into 8-connected regions within overlapping orientation
    bins, and each sufficiently straight region is reduced to a
    least-squares segment. Deterministic for a fixed image; not a
    replacement for a full detector.
    """
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError("grayscale raster expected")
    if image.shape != (int(frame.height), int(frame.width)):
        raise ValueError(
            f"image shape {image.shape} does not match frame "
            f"{int(frame.height)}x{int(frame.width)}"
        )
    # the smoothing keeps rasterization staircases inside one orientation bin
    gx = ndimage.gaussian_filter(image, 1.0, order=(0, 1))
    gy = ndimage.gaussian_filter(image, 1.0, order=(1, 0))
    mag = np.hypot(gx, gy)
    if mag.max() <= 0:
        return SegmentSet(frame, np.empty((0, 4)))
    strong = mag > _otsu_threshold(mag[mag > 0])
    if not strong.any():
        return SegmentSet(frame, np.empty((0, 4)))
    # line orientation is perpendicular to the gradient, folded into [0, pi)
    orient = np.mod(np.arctan2(gy, gx) + np.pi / 2.0, np.pi)

    n_bins = 8
    half_width = np.pi / n_bins  # overlapping bins: each pixel lands in two
    structure = np.ones((3, 3), dtype=bool)
    candidates: list[tuple[np.ndarray, float]] = []
    for k in range(n_bins):
        center = k * np.pi / n_bins
        dist = np.abs(np.mod(orient - center + np.pi / 2.0, np.pi) - np.pi / 2.0)
        mask = strong & (dist < half_width)
        labels, n_comp = ndimage.label(mask, structure=structure)
        for comp in range(1, n_comp + 1):
            ys, xs = np.nonzero(labels == comp)
            if ys.size < min_length:
                continue
            fit = _fit_component(ys, xs)
            if fit is None:
                continue
            row, length, rms = fit
            if length >= min_length and rms <= max_residual:
                candidates.append((row, length))

    # near-duplicates arise from overlapping bins; keep the longest of each
    candidates.sort(key=lambda c: (-c[1], c[0][0], c[0][1]))
    kept: list[np.ndarray] = []
    for row, _length in candidates:
        mid = 0.5 * (row[:2] + row[2:])
        ang = np.arctan2(row[3] - row[1], row[2] - row[0]) % np.pi
        duplicate = False
        for other in kept:
            oang = np.arctan2(other[3] - other[1], other[2] - other[0]) % np.pi
            dang = abs(ang - oang)
            dang = min(dang, np.pi - dang)
            if dang < np.deg2rad(3.0) and _point_segment_distance(mid, other) < 2.0:
                duplicate = True
                break
        if not duplicate:
            kept.append(row)
    if not kept:
        return SegmentSet(frame, np.empty((0, 4)))
    return SegmentSet(frame, _clamp_endpoints(frame, np.array(kept)))


def filter_for_horizon(
    segs: SegmentSet,
    zenith_dir: SphereLine,
    h: SphereLine,
    theta_ver: float,
    theta_hor: float,
) -> SegmentSet:
    """Drop near-vertical and near-horizontal segments before VP search.

    Angles compare image-space orientations: a segment is near-vertical
    when its direction is within theta_ver of the zenith line's direction
    and near-horizontal when within theta_hor of the horizon candidate's.
    Keeps exactly the segments at or beyond both thresholds (the
    complements use strict ``<``).
    """
    if not (theta_ver > 0 and theta_hor > 0):
        raise ValueError("thresholds must be positive")
    orient = segs.orientations
    zen_orient = line_image_orientation(segs.frame, zenith_dir)
    hor_orient = line_image_orientation(segs.frame, h)
    keep = (orientation_difference(orient, zen_orient) >= theta_ver) & (
        orientation_difference(orient, hor_orient) >= theta_hor
    )
    return segs.subset(keep)


def select_vertical_candidates(
    segs: SegmentSet, zenith_dir: SphereLine, theta_ver: float
) -> SegmentSet:
    """Segments oriented within theta_ver of the zenith line (strict ``<``)."""
    if not theta_ver > 0:
        raise ValueError("theta_ver must be positive")
    zen_orient = line_image_orientation(segs.frame, zenith_dir)
    return segs.subset(orientation_difference(segs.orientations, zen_orient) < theta_ver)
