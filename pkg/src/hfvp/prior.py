"""Horizon-line parameterization and the global-context prior.

A horizon line is parameterized by a slope angle alpha in [-pi/2, pi/2)
and a signed pixel offset measured from the principal point along the
direction (-sin(alpha), cos(alpha)), i.e. along the zenith direction of
that slope. Offsets are squashed into a bounded interval through
w = atan(o / kappa) for binning, which is what file-backed categorical
priors are expressed in. A categorical prior is converted to a continuous
one by sampling it and moment-matching a Gaussian; the no-context fallback
samples offsets uniformly instead.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import CameraFrame

N_BINS = 500


class UnsupportedModeError(ValueError):
    """Raised when an operation needs a file-backed (context) prior."""


@dataclass(frozen=True)
class HorizonParam:
    """Slope angle (radians) and signed offset (pixels) of a horizon line."""

    alpha: float
    offset: float

    def squashed_offset(self, kappa: float) -> float:
        return math.atan(self.offset / kappa)


def horizon_image_line(frame: CameraFrame, param: HorizonParam) -> tuple[float, float, float]:
    """Pixel-space coefficients (a, b, c) of the line a*u + b*v + c = 0.

    The line has direction (cos alpha, sin alpha) and passes through the
    principal point displaced by ``offset`` along (-sin alpha, cos alpha).
    """
    nx = -math.sin(param.alpha)
    ny = math.cos(param.alpha)
    c = -(nx * frame.cu + ny * frame.cv + param.offset)
    return (nx, ny, c)


def horizon_param_from_line(
    frame: CameraFrame, coeffs: tuple[float, float, float]
) -> HorizonParam:
    """Inverse of :func:`horizon_image_line` (slope folded to [-pi/2, pi/2))."""
    a, b, c = coeffs
    norm = math.hypot(a, b)
    if norm <= 0:
        raise ValueError("degenerate image line")
    a, b, c = a / norm, b / norm, c / norm
    if b < 0 or (b == 0 and a < 0):
        a, b, c = -a, -b, -c
    alpha = math.atan2(-a, b)
    offset = -(a * frame.cu + b * frame.cv + c)
    return HorizonParam(alpha=alpha, offset=offset)


def squash(o: float, kappa: float) -> float:
    """Map an unsigned offset to [0, pi/2) via atan(o / kappa)."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if o < 0:
        raise ValueError(f"offset must be non-negative, got {o}")
    return math.atan(o / kappa)


def unsquash(w: float, kappa: float) -> float:
    """Inverse of :func:`squash` on [0, pi/2)."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if not 0 <= w < math.pi / 2:
        raise ValueError(f"squashed offset {w} outside [0, pi/2)")
    return kappa * math.tan(w)


def _unsquash_signed(w: np.ndarray | float, kappa: float):
    # tan is odd, so the same formula covers signed squashed offsets
    return kappa * np.tan(w)


@dataclass(frozen=True)
class CategoricalPrior:
    """500-bin categorical distributions over slope and squashed offset.

    ``w_domain`` may be signed (covering both sides of the principal
    point) or unsigned in the [0, pi/2) style, in which case consumers
    mirror it symmetrically.
    """

    alpha_bins: np.ndarray
    w_bins: np.ndarray
    alpha_domain: tuple[float, float]
    w_domain: tuple[float, float]
    kappa: float

    def __post_init__(self):
        for name, bins in (("alpha_bins", self.alpha_bins), ("w_bins", self.w_bins)):
            if bins.shape != (N_BINS,):
                raise ValueError(f"{name} must have {N_BINS} entries, got {bins.shape}")
            if np.any(bins < 0):
                raise ValueError(f"{name} contains negative probabilities")
            if abs(float(bins.sum()) - 1.0) > 1e-6:
                raise ValueError(f"{name} sums to {bins.sum()}, expected 1")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")

    @staticmethod
    def _centers(domain: tuple[float, float]) -> np.ndarray:
        edges = np.linspace(domain[0], domain[1], N_BINS + 1)
        return 0.5 * (edges[:-1] + edges[1:])

    @property
    def alpha_centers(self) -> np.ndarray:
        return self._centers(self.alpha_domain)

    @property
    def w_centers(self) -> np.ndarray:
        return self._centers(self.w_domain)

    def signed_w_distribution(self) -> tuple[np.ndarray, np.ndarray]:
        """(centers, probabilities) over signed squashed offsets.

        Signed domains pass through unchanged; unsigned ones are mirrored
        symmetrically about zero with the mass split between the sides.
        """
        centers = self.w_centers
        if self.w_domain[0] < 0:
            return centers, self.w_bins
        mirrored = np.concatenate([-centers[::-1], centers])
        probs = np.concatenate([self.w_bins[::-1], self.w_bins]) / 2.0
        return mirrored, probs


def load_prior(path: str | Path, frame: CameraFrame) -> CategoricalPrior:
    """Read a categorical prior file, resolving kappa against the frame."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        alpha_bins = np.asarray(raw["alpha_bins"], dtype=float)
        w_bins = np.asarray(raw["w_bins"], dtype=float)
        alpha_domain = tuple(float(x) for x in raw["alpha_domain"])
        w_domain = tuple(float(x) for x in raw["w_domain"])
    except KeyError as exc:
        raise ValueError(f"{path}: missing prior field {exc}") from exc
    kappa_over_height = float(raw.get("kappa_over_height", 0.2))
    for name, bins in (("alpha_bins", alpha_bins), ("w_bins", w_bins)):
        if abs(float(bins.sum()) - 1.0) > 1e-6:
            raise ValueError(f"{path}: {name} sums to {bins.sum()}, expected 1")
    # renormalize away serialization round-off once validated
    return CategoricalPrior(
        alpha_bins=alpha_bins / alpha_bins.sum(),
        w_bins=w_bins / w_bins.sum(),
        alpha_domain=alpha_domain,  # type: ignore[arg-type]
        w_domain=w_domain,  # type: ignore[arg-type]
        kappa=kappa_over_height * frame.height,
    )


def write_prior(
    path: str | Path,
    alpha_bins: np.ndarray,
    w_bins: np.ndarray,
    alpha_domain: tuple[float, float],
    w_domain: tuple[float, float],
    kappa_over_height: float = 0.2,
) -> None:
    payload = {
        "alpha_bins": [float(x) for x in alpha_bins],
        "w_bins": [float(x) for x in w_bins],
        "alpha_domain": [float(alpha_domain[0]), float(alpha_domain[1])],
        "w_domain": [float(w_domain[0]), float(w_domain[1])],
        "kappa_over_height": float(kappa_over_height),
    }
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


@dataclass(frozen=True)
class HorizonPrior:
    """Continuous horizon prior: Gaussian fits plus sampling metadata.

    ``source`` is "file" for fits of categorical CNN outputs and "none"
    for the no-context fallback, whose offsets are sampled uniformly over
    ``offset_range`` rather than from the Gaussian fields.
    """

    alpha_mean: float
    alpha_std: float
    o_mean: float
    o_std: float
    source: str
    categorical: CategoricalPrior | None = None
    offset_range: tuple[float, float] | None = None
    alpha_floored: bool = False
    o_floored: bool = False

    @property
    def file_backed(self) -> bool:
        return self.source == "file"

    def map_slope(self) -> float:
        """Slope maximizing the prior; 0 for the no-context fallback."""
        if self.categorical is None:
            return self.alpha_mean
        return float(self.categorical.alpha_centers[int(np.argmax(self.categorical.alpha_bins))])


def fit_gaussian(cat: CategoricalPrior, n_samples: int = 5000, seed: int = 0) -> HorizonPrior:
    """Moment-match Gaussians to a categorical prior by sampling it.

    Slope moments come from alpha-bin samples directly; offset moments are
    computed in pixel space after mapping sampled squashed offsets through
    the inverse squash. A degenerate categorical (all mass in one bin)
    gets its standard deviation floored at one bin width, flagged on the
    result. Bit-reproducible for a fixed seed.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    rng = np.random.default_rng(seed)

    alpha_centers = cat.alpha_centers
    alpha_idx = rng.choice(N_BINS, size=n_samples, p=cat.alpha_bins)
    alpha_samples = alpha_centers[alpha_idx]
    alpha_mean = float(alpha_samples.mean())
    alpha_std = float(alpha_samples.std())
    alpha_binwidth = (cat.alpha_domain[1] - cat.alpha_domain[0]) / N_BINS
    alpha_floored = alpha_std < alpha_binwidth
    if alpha_floored:
        alpha_std = alpha_binwidth

    w_centers, w_probs = cat.signed_w_distribution()
    w_idx = rng.choice(w_centers.size, size=n_samples, p=w_probs)
    o_samples = _unsquash_signed(w_centers[w_idx], cat.kappa)
    o_mean = float(o_samples.mean())
    o_std = float(o_samples.std())
    w_edges = np.linspace(cat.w_domain[0], cat.w_domain[1], N_BINS + 1)
    mode_bin = int(np.argmax(cat.w_bins))
    o_binwidth = float(
        _unsquash_signed(w_edges[mode_bin + 1], cat.kappa)
        - _unsquash_signed(w_edges[mode_bin], cat.kappa)
    )
    o_floored = o_std < o_binwidth
    if o_floored:
        o_std = o_binwidth

    return HorizonPrior(
        alpha_mean=alpha_mean,
        alpha_std=alpha_std,
        o_mean=o_mean,
        o_std=o_std,
        source="file",
        categorical=cat,
        alpha_floored=alpha_floored,
        o_floored=o_floored,
    )


def no_context_prior(frame: CameraFrame) -> HorizonPrior:
    """Fallback prior: zero roll, offsets uniform over [-2H, 2H]."""
    h = frame.height
    return HorizonPrior(
        alpha_mean=0.0,
        alpha_std=0.0,
        o_mean=0.0,
        o_std=0.0,
        source="none",
        offset_range=(-2.0 * h, 2.0 * h),
    )


def map_estimate(prior: HorizonPrior) -> HorizonParam:
    """Horizon parameters maximizing a file-backed prior.

    Both the slope and the squashed offset are taken at their categorical
    argmax bins (ties resolved to the lowest index) and the offset is
    mapped back to pixels. The no-context prior has no posterior to
    maximize and raises.
    """
    if prior.categorical is None:
        raise UnsupportedModeError("MAP estimate requires a file-backed prior")
    cat = prior.categorical
    alpha = float(cat.alpha_centers[int(np.argmax(cat.alpha_bins))])
    w_centers, w_probs = cat.signed_w_distribution()
    w = float(w_centers[int(np.argmax(w_probs))])
    return HorizonParam(alpha=alpha, offset=float(_unsquash_signed(w, cat.kappa)))
