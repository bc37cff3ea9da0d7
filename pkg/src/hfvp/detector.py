"""Horizon-first search for horizontal vanishing points.

Horizon line candidates perpendicular to the zenith direction are sampled
from the prior's offset distribution. On each candidate a random subset of
segments proposes intersection points, an exact maximum weighted
independent set picks a well-separated subset of them, an EM-style loop
refines each picked VP along the candidate line, and the candidate is
scored by the summed consistency of its two strongest VPs. The candidate
with the largest score wins.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    CameraFrame,
    SphereLine,
    SpherePoint,
    canonical,
    consistency_matrix,
    line_from_image,
    line_to_image,
    null_space_basis,
    point_line_angles,
)
from .params import AlgorithmParams
from .prior import (
    HorizonParam,
    HorizonPrior,
    horizon_image_line,
    map_estimate,
)
from .segments import SegmentSet, filter_for_horizon
from .zenith import ZenithResult, detect_zenith, initial_zenith_direction

log = logging.getLogger("hfvp.detector")


@dataclass
class HorizonCandidate:
    """One sampled horizon line and the VPs found on it."""

    param: HorizonParam
    line: SphereLine
    vps: list[SpherePoint] = field(default_factory=list)
    vp_weights: np.ndarray = field(default_factory=lambda: np.empty(0))
    score: float = 0.0


@dataclass(frozen=True)
class VPGraph:
    """Proximity graph of candidate VPs on one horizon line.

    ``positions`` holds each node's angle on the projective circle of the
    horizon line (period pi); it is what lets the solver order nodes and
    decompose the ring into linear subproblems.
    """

    nodes: np.ndarray
    weights: np.ndarray
    adjacency: np.ndarray
    positions: np.ndarray | None = None

    def __post_init__(self):
        n = self.weights.shape[0]
        if self.nodes.shape[0] != n or self.adjacency.shape != (n, n):
            raise ValueError("inconsistent graph arrays")
        if np.any(self.weights < 0):
            raise ValueError("node weights must be non-negative")
        if n and (np.any(np.diag(self.adjacency)) or not np.array_equal(self.adjacency, self.adjacency.T)):
            raise ValueError("adjacency must be symmetric and irreflexive")


@dataclass(frozen=True)
class MwisResult:
    indices: tuple[int, ...]
    weight: float
    method: str  # "dp" or "branch-and-bound"


def _linear_mwis(adj: np.ndarray, weights: np.ndarray) -> tuple[float, list[int]] | None:
    """Exact MWIS of a linearly ordered proximity graph by DP.

    Requires each node's conflicts among its predecessors to form a
    contiguous suffix of the order; returns None when that fails so the
    caller can fall back to the general solver.
    """
    m = weights.shape[0]
    if m == 0:
        return 0.0, []
    low = np.tril(adj, k=-1)
    if m > 1:
        drop = low[:, :-1] & ~low[:, 1:]
        cols = np.arange(m - 1)[None, :]
        rows = np.arange(m)[:, None]
        if np.any(drop & (cols < rows - 1)):
            return None
    run = low.sum(axis=1)  # length of the conflicting suffix before each node
    best = np.zeros(m + 1)
    take = np.zeros(m + 1, dtype=bool)
    for i in range(m):
        prev = i - int(run[i])  # number of compatible predecessors
        with_i = weights[i] + best[prev]
        if with_i > best[i]:
            best[i + 1] = with_i
            take[i + 1] = True
        else:
            best[i + 1] = best[i]
    sel: list[int] = []
    i = m
    while i > 0:
        if take[i]:
            sel.append(i - 1)
            i = (i - 1) - int(run[i - 1])
        else:
            i -= 1
    sel.reverse()
    return float(best[m]), sel


def _branch_and_bound(adj: np.ndarray, weights: np.ndarray) -> MwisResult:
    """Exact MWIS for arbitrary graphs, with suffix-weight pruning."""
    n = weights.shape[0]
    order = sorted(range(n), key=lambda i: (-weights[i], i))
    w = weights[order]
    neigh = [0] * n
    for a in range(n):
        mask = 0
        for b in range(n):
            if adj[order[a], order[b]]:
                mask |= 1 << b
        neigh[a] = mask
    suffix = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])
    best_val = -1.0
    best_mask = 0

    def rec(i: int, chosen: int, blocked: int, val: float) -> None:
        nonlocal best_val, best_mask
        if val + suffix[i] <= best_val:
            return
        if i == n:
            if val > best_val:
                best_val = val
                best_mask = chosen
            return
        if not blocked & (1 << i):
            rec(i + 1, chosen | (1 << i), blocked | neigh[i], val + w[i])
        rec(i + 1, chosen, blocked, val)

    rec(0, 0, 0, 0.0)
    sel = sorted(order[i] for i in range(n) if best_mask & (1 << i))
    return MwisResult(tuple(sel), float(weights[sel].sum()) if sel else 0.0, "branch-and-bound")


def mwis_ring(graph: VPGraph) -> MwisResult:
    """Exact maximum weighted independent set of a VP proximity graph.

    Points on the horizon's projective circle yield a ring-like proximity
    structure, so the optimum is found by conditioning on the closed
    neighborhood of a minimal-degree node: each choice leaves a circular
    arc whose restriction is solved exactly by dynamic programming. Graphs
    without positions, and graphs whose remainders fail the linearity
    check, go through an exact branch-and-bound instead (flagged in the
    returned ``method``).
    """
    n = graph.weights.shape[0]
    if n == 0:
        return MwisResult((), 0.0, "dp")
    adj = graph.adjacency
    weights = graph.weights
    degrees = adj.sum(axis=1)
    if degrees.max() == 0:
        return MwisResult(tuple(range(n)), float(weights.sum()), "dp")
    if graph.positions is None:
        return _branch_and_bound(adj, weights)

    positions = np.mod(graph.positions, np.pi)
    v = int(np.argmin(degrees))
    best_val = -1.0
    best_sel: tuple[int, ...] = ()

    anchors = [v] + [int(u) for u in np.nonzero(adj[v])[0]]
    for u in anchors:
        closed = adj[u].copy()
        closed[u] = True
        rem = np.nonzero(~closed)[0]
        rel = np.mod(positions[rem] - positions[u], np.pi)
        rem = rem[np.argsort(rel, kind="stable")]
        dp = _linear_mwis(adj[np.ix_(rem, rem)], weights[rem])
        if dp is None:
            log.debug("mwis ring decomposition failed, using branch and bound")
            return _branch_and_bound(adj, weights)
        val, local = dp
        chosen = tuple(sorted([u] + [int(rem[i]) for i in local]))
        cand_val = float(weights[u] + val)
        if cand_val > best_val:
            best_val = cand_val
            best_sel = chosen
        if u == v and val > best_val:  # optimum may avoid v's neighborhood entirely
            best_val = float(val)
            best_sel = tuple(int(rem[i]) for i in local)
    return MwisResult(best_sel, best_val, "dp")


def _canonical_rows(rows: np.ndarray) -> np.ndarray:
    flip = (rows[:, 2] < 0) | (
        (rows[:, 2] == 0) & ((rows[:, 1] < 0) | ((rows[:, 1] == 0) & (rows[:, 0] < 0)))
    )
    rows[flip] *= -1.0
    return rows


def sample_candidates(
    prior: HorizonPrior,
    zenith_dir: SphereLine,
    frame: CameraFrame,
    n_candidates: int,
    seed: int | np.random.SeedSequence = 0,
) -> list[HorizonCandidate]:
    """Sample horizon lines perpendicular to the zenith direction.

    The slope is fixed by ``zenith_dir``; offsets follow the prior (its
    Gaussian fit when file-backed, uniform over [-2H, 2H] otherwise). The
    prior's most likely horizon is always included as candidate 0, the
    remaining ``n_candidates - 1`` are random. Deterministic given seed.
    """
    if n_candidates < 1:
        raise ValueError("n_candidates must be at least 1")
    rng = np.random.default_rng(seed)
    a, b, _ = line_to_image(frame, zenith_dir)
    d = np.array([b, -a])
    d /= np.hypot(d[0], d[1])
    if d[1] < 0 or (d[1] == 0 and d[0] < 0):
        d = -d
    alpha = math.atan2(-d[0], d[1])

    if prior.file_backed:
        # a Gaussian's mode is its mean, so priors without the categorical
        # still get a most-likely first candidate
        map_offset = map_estimate(prior).offset if prior.categorical is not None else prior.o_mean
        offsets = rng.normal(prior.o_mean, prior.o_std, size=n_candidates - 1)
    else:
        map_offset = 0.0
        lo, hi = prior.offset_range  # type: ignore[misc]
        offsets = rng.uniform(lo, hi, size=n_candidates - 1)

    candidates = []
    for s in np.concatenate([[map_offset], offsets]):
        param = HorizonParam(alpha=alpha, offset=float(s))
        coeffs = horizon_image_line(frame, param)
        candidates.append(HorizonCandidate(param=param, line=line_from_image(frame, *coeffs)))
    return candidates


def init_vps(
    cand: HorizonCandidate,
    filtered: SegmentSet,
    params: AlgorithmParams,
    seed: int | np.random.SeedSequence | np.random.Generator = 0,
) -> tuple[VPGraph, MwisResult]:
    """Propose VPs on a candidate line and pick the best separated subset.

    A subset of segments is sampled without replacement and intersected
    with the candidate line; each intersection is weighted by its summed
    consistency with every filtered segment, nodes closer than theta_dist
    are connected, and the exact MWIS of that graph is returned.
    """
    if len(filtered) == 0:
        raise ValueError("filtered segment set is empty")
    rng = np.random.default_rng(seed)
    m = min(params.subset_size, len(filtered))
    idx = np.sort(rng.choice(len(filtered), size=m, replace=False))
    pts = np.cross(filtered.lines[idx], cand.line)
    norms = np.linalg.norm(pts, axis=1)
    keep = norms > 1e-12  # segments nearly parallel to the candidate line
    pts = _canonical_rows(pts[keep] / norms[keep, None])
    if pts.shape[0] == 0:
        graph = VPGraph(pts, np.empty(0), np.empty((0, 0), dtype=bool), np.empty(0))
        return graph, MwisResult((), 0.0, "dp")

    weights = consistency_matrix(pts, filtered.lines, params.theta_con).sum(axis=1)
    theta = np.arccos(np.minimum(np.abs(pts @ pts.T), 1.0))
    adjacency = np.triu(theta <= params.theta_dist, k=1)
    adjacency |= adjacency.T
    basis = null_space_basis(cand.line)
    positions = np.mod(np.arctan2(pts @ basis[:, 1], pts @ basis[:, 0]), np.pi)
    graph = VPGraph(nodes=pts, weights=weights, adjacency=adjacency, positions=positions)
    return graph, mwis_ring(graph)


def m_step(h: SphereLine, lines: np.ndarray, basis: np.ndarray | None = None) -> SpherePoint:
    """Point on ``h`` minimizing the algebraic distance to ``lines``.

    The point is written as a combination of a null-space basis of ``h``
    and the optimal coefficients are the smallest right singular vector of
    the projected line matrix, so the constraint holds exactly.
    """
    B = null_space_basis(h) if basis is None else basis
    _, _, vt = np.linalg.svd(lines @ B, full_matrices=False)
    p = B @ vt[-1]
    return canonical(p / np.linalg.norm(p))


def refine_vps(
    h: SphereLine,
    vps: list[SpherePoint],
    filtered: SegmentSet,
    em_iters: int = 3,
    theta_con: float = math.radians(2.0),
) -> list[SpherePoint]:
    """EM-style refinement of VPs constrained to the horizon line.

    Each iteration assigns the segments with positive consistency to the
    VP and moves the VP to the algebraic-distance minimizer over that
    assignment. A VP whose assignment empties out is dropped. Runs at most
    ``em_iters`` rounds, stopping early once an assignment repeats.
    """
    lines = filtered.lines
    basis = null_space_basis(h)
    refined: list[SpherePoint] = []
    for p in vps:
        prev_mask: np.ndarray | None = None
        alive = True
        for _ in range(em_iters):
            mask = point_line_angles(p, lines) < theta_con
            if not mask.any():
                alive = False
                break
            if prev_mask is not None and np.array_equal(mask, prev_mask):
                break
            prev_mask = mask
            p = m_step(h, lines[mask], basis)
        if alive:
            refined.append(p)
    return refined


def _enforce_separation(
    vps: list[SpherePoint], weights: np.ndarray, theta_dist: float
) -> tuple[list[SpherePoint], np.ndarray]:
    """Greedily keep strongest VPs so the pairwise separation holds."""
    order = sorted(range(len(vps)), key=lambda i: (-weights[i], i))
    kept: list[int] = []
    for i in order:
        theta_to_kept = [
            math.acos(min(abs(float(np.dot(vps[i], vps[j]))), 1.0)) for j in kept
        ]
        if all(t > theta_dist for t in theta_to_kept):
            kept.append(i)
    return [vps[i] for i in kept], weights[kept]


def score_candidate(cand: HorizonCandidate, filtered: SegmentSet, theta_con: float) -> float:
    """Total consistency of the candidate's two strongest VPs.

    Uses the two highest-weighted VPs (or the single one when only one
    was kept) and sums their consistency over every filtered segment.
    """
    if not cand.vps:
        return 0.0
    order = sorted(range(len(cand.vps)), key=lambda i: (-cand.vp_weights[i], i))[:2]
    top = np.stack([cand.vps[i] for i in order])
    return float(consistency_matrix(top, filtered.lines, theta_con).sum())


@dataclass
class DetectionResult:
    """Zenith, horizon, and horizontal VPs detected in one image."""

    zenith: ZenithResult
    horizon: SphereLine
    horizon_image: tuple[float, float, float]
    param: HorizonParam
    vps: list[SpherePoint]
    vp_weights: np.ndarray
    segment_vp: np.ndarray
    score: float
    candidate_index: int
    degraded: bool
    timings: dict[str, float] = field(default_factory=dict)


def detect(
    segs: SegmentSet,
    prior: HorizonPrior,
    frame: CameraFrame,
    params: AlgorithmParams | None = None,
    seed: int = 0,
) -> DetectionResult:
    """Full pipeline: zenith, candidate sampling, per-candidate VP search.

    Deterministic for a fixed seed. An empty segment set degrades to the
    prior's most likely horizon with no VPs, flagged on the result.
    """
    params = params or AlgorithmParams()
    t_start = time.perf_counter()
    root = np.random.SeedSequence(seed)
    zen_seed, samp_seed, cand_root = root.spawn(3)

    if len(segs) == 0:
        param = map_estimate(prior) if prior.file_backed else HorizonParam(0.0, 0.0)
        coeffs = horizon_image_line(frame, param)
        line = line_from_image(frame, *coeffs)
        zenith = ZenithResult(None, initial_zenith_direction(prior, frame))
        return DetectionResult(
            zenith=zenith,
            horizon=line,
            horizon_image=coeffs,
            param=param,
            vps=[],
            vp_weights=np.empty(0),
            segment_vp=np.empty(0, dtype=int),
            score=0.0,
            candidate_index=-1,
            degraded=True,
            timings={"total_s": time.perf_counter() - t_start},
        )

    init_dir = initial_zenith_direction(prior, frame)
    zen = detect_zenith(segs, init_dir, params, zen_seed)
    t_zenith = time.perf_counter()

    candidates = sample_candidates(prior, zen.zenith_dir, frame, params.n_candidates, samp_seed)
    # orientation filtering depends only on the shared candidate slope, so
    # one filtered set serves every candidate
    filtered = filter_for_horizon(
        segs, zen.zenith_dir, candidates[0].line, params.theta_ver, params.theta_hor
    )
    cand_seeds = cand_root.spawn(len(candidates))
    for cand, cseed in zip(candidates, cand_seeds):
        if len(filtered) == 0:
            break
        graph, sel = init_vps(cand, filtered, params, cseed)
        if not sel.indices:
            continue
        vps = refine_vps(
            cand.line,
            [graph.nodes[i] for i in sel.indices],
            filtered,
            params.em_iters,
            params.theta_con,
        )
        if not vps:
            continue
        weights = consistency_matrix(np.stack(vps), filtered.lines, params.theta_con).sum(axis=1)
        cand.vps, cand.vp_weights = _enforce_separation(vps, weights, params.theta_dist)
        cand.score = score_candidate(cand, filtered, params.theta_con)

    scores = np.array([c.score for c in candidates])
    best_idx = int(np.argmax(scores))  # ties resolve to the lowest index
    winner = candidates[best_idx]
    t_scoring = time.perf_counter()

    if winner.vps:
        cons = consistency_matrix(np.stack(winner.vps), segs.lines, params.theta_con)
        segment_vp = np.where(cons.max(axis=0) > 0, np.argmax(cons, axis=0), -1)
    else:
        segment_vp = np.full(len(segs), -1, dtype=int)

    log.debug(
        "detect: best candidate %d score %.4f with %d VPs", best_idx, winner.score, len(winner.vps)
    )
    return DetectionResult(
        zenith=zen,
        horizon=winner.line,
        horizon_image=line_to_image(frame, winner.line),
        param=winner.param,
        vps=winner.vps,
        vp_weights=winner.vp_weights,
        segment_vp=segment_vp,
        score=float(winner.score),
        candidate_index=best_idx,
        degraded=False,
        timings={
            "zenith_s": t_zenith - t_start,
            "candidates_s": t_scoring - t_zenith,
            "total_s": time.perf_counter() - t_start,
        },
    )
