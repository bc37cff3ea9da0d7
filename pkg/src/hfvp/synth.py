"""Synthetic scenes with known zenith, horizon, and horizontal VPs.

A pinhole camera with a given horizontal field of view, pitch, and roll
fixes the ground-truth geometry; line families are then drawn directly in
the image as chords through their family's vanishing point, which keeps
the incidence exact by construction. Gaussian endpoint noise and random
chord outliers are added on top. Everything is seed-deterministic.

Sign conventions (v grows downward): positive pitch tilts the camera up,
moving the horizon down in the image by f*tan(pitch); positive roll
rotates the camera so the image horizon gets slope angle -roll.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import erf

from .geometry import CameraFrame, SphereLine, SpherePoint, canonical, line_from_image, unit
from .prior import N_BINS, horizon_param_from_line, write_prior
from .segments import SegmentSet, save_segments

# generator defaults for camera sampling (truncated normals)
FOV_NORMAL = (60.0, 10.0)
PITCH_NORMAL = (0.0, 10.0)
ROLL_NORMAL = (0.0, 5.0)
FOV_RANGE = (40.0, 80.0)
PITCH_RANGE = (-30.0, 30.0)
ROLL_RANGE = (-20.0, 20.0)


def _truncated_normal(rng: np.random.Generator, mu: float, sigma: float, lo: float, hi: float) -> float:
    while True:
        x = float(rng.normal(mu, sigma))
        if lo <= x <= hi:
            return x


@dataclass(frozen=True)
class SyntheticScene:
    frame: CameraFrame
    fov: float
    pitch: float
    roll: float
    gt_horizon: SphereLine
    gt_horizon_image: tuple[float, float, float]
    gt_zenith: SpherePoint
    vp_families: list[tuple[SpherePoint, list[int]]]
    segments: SegmentSet
    outlier_ids: list[int]


def _camera_rotation(pitch: float, roll: float) -> np.ndarray:
    """World-to-camera rotation. World: X right, Y up, Z forward."""
    p = math.radians(pitch)
    r = math.radians(roll)
    base = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]])  # y down
    rx = np.array(
        [[1.0, 0.0, 0.0], [0.0, math.cos(p), math.sin(p)], [0.0, -math.sin(p), math.cos(p)]]
    )
    rz = np.array(
        [[math.cos(r), math.sin(r), 0.0], [-math.sin(r), math.cos(r), 0.0], [0.0, 0.0, 1.0]]
    )
    return rz @ rx @ base


def _focal_px(fov: float, frame: CameraFrame) -> float:
    if not 0 < fov < 180:
        raise ValueError(f"horizontal fov must be in (0, 180), got {fov}")
    return (frame.width / 2.0) / math.tan(math.radians(fov) / 2.0)


def horizon_from_camera(
    fov: float, pitch: float, roll: float, frame: CameraFrame
) -> tuple[float, float, float]:
    """Image line (a, b, c) of the horizon for the given camera pose."""
    if not abs(pitch) < 90:
        raise ValueError("pitch must satisfy |pitch| < 90 degrees")
    f = _focal_px(fov, frame)
    up = _camera_rotation(pitch, roll) @ np.array([0.0, 1.0, 0.0])
    a, b = up[0], up[1]
    c = up[2] * f - a * frame.cu - b * frame.cv
    return (float(a), float(b), float(c))


def _direction_vp(rot: np.ndarray, f: float, frame: CameraFrame, d_world: np.ndarray) -> SpherePoint:
    """Calibrated unit VP of a world direction (valid at infinity too)."""
    d = rot @ d_world
    return canonical(unit(np.array([frame.rho * f * d[0], frame.rho * f * d[1], d[2]])))


def _vp_pixel_homogeneous(rot: np.ndarray, f: float, frame: CameraFrame, d_world: np.ndarray) -> np.ndarray:
    d = rot @ d_world
    return np.array([f * d[0] + frame.cu * d[2], f * d[1] + frame.cv * d[2], d[2]])


def _clip_to_frame(p0: np.ndarray, p1: np.ndarray, frame: CameraFrame) -> tuple[np.ndarray, np.ndarray] | None:
    """Liang-Barsky clip of segment p0-p1 to the image rectangle."""
    d = p1 - p0
    t0, t1 = 0.0, 1.0
    for coord, lo, hi in ((0, 0.0, frame.width), (1, 0.0, frame.height)):
        if abs(d[coord]) < 1e-12:
            if not lo <= p0[coord] <= hi:
                return None
            continue
        ta = (lo - p0[coord]) / d[coord]
        tb = (hi - p0[coord]) / d[coord]
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 >= t1:
            return None
    return p0 + t0 * d, p0 + t1 * d


def _family_chords(
    vp_pix: np.ndarray,
    count: int,
    frame: CameraFrame,
    rng: np.random.Generator,
    min_len: float = 30.0,
    max_len: float = 150.0,
) -> np.ndarray:
    """Chords through a (pixel-homogeneous) VP, clipped to the frame."""
    rows = np.empty((count, 4))
    made = 0
    attempts = 0
    while made < count:
        attempts += 1
        if attempts > 200 * count:
            raise RuntimeError("failed to place family segments inside the frame")
        q = rng.uniform((5.0, 5.0), (frame.width - 5.0, frame.height - 5.0))
        direction = vp_pix[:2] - q * vp_pix[2]
        nrm = math.hypot(direction[0], direction[1])
        if nrm < 1e-9:  # anchor exactly at the VP
            continue
        direction = direction / nrm
        half = rng.uniform(min_len, max_len) / 2.0
        clipped = _clip_to_frame(q - half * direction, q + half * direction, frame)
        if clipped is None:
            continue
        p0, p1 = clipped
        if math.hypot(*(p1 - p0)) < 20.0:
            continue
        rows[made] = (p0[0], p0[1], p1[0], p1[1])
        made += 1
    return rows


def _uniform_chords(
    count: int, frame: CameraFrame, rng: np.random.Generator, min_len: float = 20.0
) -> np.ndarray:
    rows = np.empty((count, 4))
    made = 0
    while made < count:
        p = rng.uniform((0.0, 0.0, 0.0, 0.0), (frame.width, frame.height, frame.width, frame.height))
        if math.hypot(p[2] - p[0], p[3] - p[1]) >= min_len:
            rows[made] = p
            made += 1
    return rows


def make_scene(
    n_families: int = 2,
    segments_per_family: int = 32,
    outlier_fraction: float = 0.2,
    endpoint_noise_px: float = 0.0,
    fov: float | None = None,
    pitch: float | None = None,
    roll: float | None = None,
    seed: int | np.random.SeedSequence = 0,
    width: int = 640,
    height: int = 480,
    outlier_mode: str = "uniform",
) -> SyntheticScene:
    """Generate a scene with one vertical and ``n_families`` horizontal families.

    Unset pose angles are sampled from truncated normals over the default
    ranges. The first two horizontal azimuths are orthogonal, extra ones
    spread evenly; ``n_families=0`` keeps only the vertical family. With
    ``outlier_mode="adversarial"`` half of the outliers converge on a false
    intersection point placed away from the horizon.
    """
    if n_families < 0:
        raise ValueError("n_families must be non-negative")
    if not 0 <= outlier_fraction < 1:
        raise ValueError("outlier_fraction must be in [0, 1)")
    if outlier_mode not in ("uniform", "adversarial"):
        raise ValueError(f"unknown outlier mode {outlier_mode!r}")
    rng = np.random.default_rng(seed)
    frame = CameraFrame(width, height)
    if fov is None:
        fov = _truncated_normal(rng, *FOV_NORMAL, *FOV_RANGE)
    if pitch is None:
        pitch = _truncated_normal(rng, *PITCH_NORMAL, *PITCH_RANGE)
    if roll is None:
        roll = _truncated_normal(rng, *ROLL_NORMAL, *ROLL_RANGE)
    fov, pitch, roll = float(fov), float(pitch), float(roll)

    rot = _camera_rotation(pitch, roll)
    f = _focal_px(fov, frame)
    horizon_image = horizon_from_camera(fov, pitch, roll, frame)
    gt_horizon = line_from_image(frame, *horizon_image)
    up = np.array([0.0, 1.0, 0.0])
    gt_zenith = _direction_vp(rot, f, frame, up)

    azimuths: list[float] = []
    if n_families >= 1:
        azimuths.append(float(rng.uniform(20.0, 70.0)))
    if n_families >= 2:
        azimuths.append(azimuths[0] + 90.0)
    for k in range(2, n_families):
        azimuths.append(azimuths[0] + (k - 1) * 180.0 / n_families)

    directions = [up] + [
        np.array([math.cos(math.radians(az)), 0.0, math.sin(math.radians(az))])
        for az in azimuths
    ]
    rows = []
    families: list[tuple[SpherePoint, list[int]]] = []
    next_id = 0
    for d_world in directions:
        vp = _direction_vp(rot, f, frame, d_world)
        vp_pix = _vp_pixel_homogeneous(rot, f, frame, d_world)
        chords = _family_chords(vp_pix, segments_per_family, frame, rng)
        ids = list(range(next_id, next_id + segments_per_family))
        next_id += segments_per_family
        rows.append(chords)
        families.append((vp, ids))

    n_family_total = (n_families + 1) * segments_per_family
    n_outliers = int(round(n_family_total * outlier_fraction / (1.0 - outlier_fraction)))
    outlier_ids = list(range(next_id, next_id + n_outliers))
    if n_outliers:
        if outlier_mode == "adversarial":
            n_cluster = n_outliers // 2
            # false intersection point well away from the true horizon
            while True:
                fu = rng.uniform(0.15 * width, 0.85 * width)
                fv = rng.uniform(0.15 * height, 0.85 * height)
                a, b, c = horizon_image
                if abs(a * fu + b * fv + c) / math.hypot(a, b) > 0.15 * height:
                    break
            fake = np.array([fu, fv, 1.0])
            rows.append(_family_chords(fake, n_cluster, frame, rng))
            rows.append(_uniform_chords(n_outliers - n_cluster, frame, rng))
        else:
            rows.append(_uniform_chords(n_outliers, frame, rng))

    endpoints = np.concatenate(rows, axis=0) if rows else np.empty((0, 4))
    if endpoint_noise_px > 0:
        endpoints = endpoints + rng.normal(0.0, endpoint_noise_px, size=endpoints.shape)
    endpoints[:, 0::2] = np.clip(endpoints[:, 0::2], 0.0, frame.width)
    endpoints[:, 1::2] = np.clip(endpoints[:, 1::2], 0.0, frame.height)

    return SyntheticScene(
        frame=frame,
        fov=fov,
        pitch=pitch,
        roll=roll,
        gt_horizon=gt_horizon,
        gt_horizon_image=horizon_image,
        gt_zenith=gt_zenith,
        vp_families=families,
        segments=SegmentSet(frame, endpoints),
        outlier_ids=outlier_ids,
    )


def _gaussian_bin_mass(mean: float, sigma: float, edges: np.ndarray) -> np.ndarray:
    """Exact Gaussian probability mass per bin, renormalized over the domain."""
    cdf = 0.5 * (1.0 + erf((edges - mean) / (sigma * math.sqrt(2.0))))
    mass = np.diff(cdf)
    return mass / mass.sum()


def write_scene_prior(
    scene: SyntheticScene,
    path: str | Path,
    sigma_offset_px: float = 5.0,
    sigma_alpha: float = math.radians(2.0),
    seed: int | np.random.SeedSequence = 0,
    kappa_over_height: float = 0.2,
) -> Path:
    """Write a categorical prior simulating a context estimator for a scene.

    The prior is centered on the true horizon perturbed by Gaussian draws
    with the given sigmas (an unbiased estimator with that error scale)
    and carries the same sigmas as its widths. Offsets are binned in the
    squashed domain via exact Gaussian CDF differences.
    """
    if not (sigma_offset_px > 0 and sigma_alpha > 0):
        raise ValueError("prior sigmas must be positive")
    rng = np.random.default_rng(seed)
    truth = horizon_param_from_line(scene.frame, scene.gt_horizon_image)
    alpha_center = truth.alpha + rng.normal(0.0, sigma_alpha)
    offset_center = truth.offset + rng.normal(0.0, sigma_offset_px)
    kappa = kappa_over_height * scene.frame.height

    half_pi = math.pi / 2.0
    alpha_edges = np.linspace(-half_pi, half_pi, N_BINS + 1)
    alpha_bins = _gaussian_bin_mass(alpha_center, sigma_alpha, alpha_edges)
    w_edges = np.linspace(-half_pi, half_pi, N_BINS + 1)
    w_bins = _gaussian_bin_mass(offset_center, sigma_offset_px, kappa * np.tan(w_edges))

    path = Path(path)
    write_prior(
        path,
        alpha_bins,
        w_bins,
        alpha_domain=(-half_pi, half_pi),
        w_domain=(-half_pi, half_pi),
        kappa_over_height=kappa_over_height,
    )
    return path


def export_scene(scene: SyntheticScene, out_dir: str | Path, stem: str) -> tuple[Path, Path]:
    """Write the segment file and ground-truth JSON for one scene."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seg_path = out_dir / f"{stem}_segments.txt"
    gt_path = out_dir / f"{stem}_gt.json"
    save_segments(seg_path, scene.segments.endpoints)
    payload = {
        "width": scene.frame.width,
        "height": scene.frame.height,
        "fov_deg": scene.fov,
        "pitch_deg": scene.pitch,
        "roll_deg": scene.roll,
        "horizon": list(scene.gt_horizon_image),
        "zenith": [float(x) for x in scene.gt_zenith],
        "vps": [[float(x) for x in vp] for vp, _ in scene.vp_families[1:]],
    }
    with gt_path.open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return seg_path, gt_path
