"""Zenith vanishing point detection.

The zenith direction is the image line through the principal point and the
zenith VP; its initial estimate comes from the prior's most likely horizon
slope (the zenith direction is perpendicular to it in image space, which
assumes a centered principal point, square pixels, and zero skew). RANSAC
over pairs of near-vertical segments then proposes the VP, and the final
estimate minimizes the summed algebraic distance to the inlier lines by
SVD.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    CameraFrame,
    SphereLine,
    SpherePoint,
    canonical,
    line_from_image,
)
from .params import AlgorithmParams
from .prior import HorizonPrior
from .segments import SegmentSet, select_vertical_candidates

log = logging.getLogger("hfvp.zenith")

# RANSAC keeps the refit only when the best inlier count exceeds this
# fraction of the vertical candidates.
MIN_INLIER_FRACTION = 0.02


@dataclass(frozen=True)
class ZenithResult:
    zenith_vp: SpherePoint | None
    zenith_dir: SphereLine
    inlier_ids: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    used_ransac: bool = False
    n_candidates: int = 0


def initial_zenith_direction(prior: HorizonPrior, frame: CameraFrame) -> SphereLine:
    """Image line through the principal point, perpendicular to the most
    likely horizon slope, lifted to the sphere."""
    alpha = prior.map_slope()
    # direction angle alpha + pi/2, expanded so alpha = 0 stays exact
    a = -math.cos(alpha)
    b = -math.sin(alpha)
    c = -(a * frame.cu + b * frame.cv)
    return line_from_image(frame, a, b, c)


def detect_zenith(
    segs: SegmentSet,
    init_dir: SphereLine,
    params: AlgorithmParams,
    seed: int | np.random.SeedSequence = 0,
) -> ZenithResult:
    """RANSAC + SVD refinement of the zenith VP.

    Vertical candidates are the segments within ``theta_ver`` of
    ``init_dir``. Each round intersects a sampled segment pair and counts
    the candidates within ``theta_con`` of the intersection. If the best
    round's inlier share exceeds 2% of the candidates, the VP is refit to
    its inliers by SVD and the zenith direction is updated through the
    principal point; otherwise the initial direction is kept. When the
    number of candidate pairs fits the budget they are enumerated
    exhaustively, which makes small problems seed-independent; ties go to
    the earliest round.
    """
    cands = select_vertical_candidates(segs, init_dir, params.theta_ver)
    n = len(cands)
    if n < 2:
        return ZenithResult(None, init_dir, used_ransac=False, n_candidates=n)

    rng = np.random.default_rng(seed)
    n_pairs = n * (n - 1) // 2
    if n_pairs <= params.ransac_budget:
        ii, jj = np.triu_indices(n, k=1)
    else:
        ii = rng.integers(0, n, size=params.ransac_budget)
        jj = rng.integers(0, n, size=params.ransac_budget)
        clash = ii == jj
        jj[clash] = (jj[clash] + 1) % n
    lines = cands.lines
    points = np.cross(lines[ii], lines[jj])
    norms = np.linalg.norm(points, axis=1)
    valid = norms > 1e-12
    points[valid] /= norms[valid, None]

    theta = np.arcsin(np.minimum(np.abs(points @ lines.T), 1.0))  # point-line distances
    counts = (theta < params.theta_con).sum(axis=1)
    counts[~valid] = 0
    best = int(np.argmax(counts))  # first maximum = lowest round index
    best_count = int(counts[best])
    log.debug("zenith ransac: %d candidates, best inliers %d/%d", n, best_count, n)

    if best_count <= MIN_INLIER_FRACTION * n:
        return ZenithResult(None, init_dir, used_ransac=False, n_candidates=n)

    inlier_mask = theta[best] < params.theta_con
    vp = _algebraic_vp(lines[inlier_mask])
    # recount against the refit point so the reported inliers satisfy the
    # consistency invariant for the returned VP
    final_mask = np.arcsin(np.minimum(np.abs(lines @ vp), 1.0)) < params.theta_con

    pp_lift = np.array([0.0, 0.0, 1.0])
    direction = np.cross(pp_lift, vp)
    dnorm = float(np.linalg.norm(direction))
    if dnorm <= 1e-12:
        # zenith at the principal point: direction undefined, keep the prior
        return ZenithResult(None, init_dir, used_ransac=False, n_candidates=n)
    zenith_dir = canonical(direction / dnorm)
    return ZenithResult(
        zenith_vp=vp,
        zenith_dir=zenith_dir,
        inlier_ids=cands.ids[final_mask],
        used_ransac=True,
        n_candidates=n,
    )


def _algebraic_vp(lines: np.ndarray) -> np.ndarray:
    """Unit point minimizing sum ||l_i . p||^2: smallest right singular vector."""
    _, _, vt = np.linalg.svd(lines, full_matrices=False)
    return canonical(vt[-1])
