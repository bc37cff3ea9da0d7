"""Calibrated homogeneous-coordinate primitives on the unit sphere.

Image points and lines are both represented as unit 3-vectors: a point is
the normalized lift of its calibrated pixel coordinates, a line is the unit
normal of the plane it spans with the camera center (Gaussian-sphere form).
Both representations are sign-ambiguous, so every angle here is computed
with antipodal identification and lands in [0, pi/2], and every constructed
vector is canonicalized to a fixed sign for deterministic tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Unit 3-vectors. Points and lines share the representation; the aliases
# only document intent in signatures.
SpherePoint = np.ndarray
SphereLine = np.ndarray

# Below this cross-product norm a join/meet is considered degenerate.
DEGENERATE_NORM = 1e-12


class DegenerateGeometryError(ValueError):
    """Raised when a join/meet collapses (parallel or antipodal inputs)."""


@dataclass(frozen=True)
class CameraFrame:
    """Image geometry: size, principal point, and the calibration scale.

    ``rho`` rescales centered pixel coordinates before lifting; the default
    is 2 / max(height, width) so the image diagonal maps to a well
    conditioned patch of the sphere. The principal point defaults to the
    image center.
    """

    width: float
    height: float
    principal_point: tuple[float, float] = None  # type: ignore[assignment]
    rho: float = None  # type: ignore[assignment]

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"frame size must be positive, got {self.width}x{self.height}")
        if self.principal_point is None:
            object.__setattr__(self, "principal_point", (self.width / 2.0, self.height / 2.0))
        if self.rho is None:
            object.__setattr__(self, "rho", 2.0 / max(self.height, self.width))
        if not self.rho > 0:
            raise ValueError("rho must be positive")

    @property
    def cu(self) -> float:
        return self.principal_point[0]

    @property
    def cv(self) -> float:
        return self.principal_point[1]


def canonical(v: np.ndarray) -> np.ndarray:
    """Fix the sign of a homogeneous vector.

    The representative with non-negative third component is chosen; ties go
    to non-negative second, then first component.
    """
    for comp in (v[2], v[1], v[0]):
        if comp > 0.0:
            return v
        if comp < 0.0:
            return -v
    return v


def unit(v: np.ndarray) -> np.ndarray:
    """Normalize to unit length; degenerate (near-zero) input raises."""
    n = float(np.linalg.norm(v))
    if n <= DEGENERATE_NORM:
        raise DegenerateGeometryError(f"cannot normalize near-zero vector {v}")
    return np.asarray(v, dtype=float) / n


def lift_point(frame: CameraFrame, u: float, v: float) -> SpherePoint:
    """Lift an image point to its unit homogeneous coordinate.

    The centered pixel coordinates are scaled by ``frame.rho`` and the
    resulting [x, y, 1] vector is normalized. The third component of the
    result is always strictly positive.
    """
    if not (math.isfinite(u) and math.isfinite(v)):
        raise ValueError(f"non-finite image point ({u}, {v})")
    vec = np.array([frame.rho * (u - frame.cu), frame.rho * (v - frame.cv), 1.0])
    return vec / np.linalg.norm(vec)


def lift_points(frame: CameraFrame, uv: np.ndarray) -> np.ndarray:
    """Vectorized :func:`lift_point` for an (N, 2) array of pixels."""
    uv = np.asarray(uv, dtype=float)
    if not np.all(np.isfinite(uv)):
        raise ValueError("non-finite image coordinates")
    vecs = np.empty((uv.shape[0], 3))
    vecs[:, 0] = frame.rho * (uv[:, 0] - frame.cu)
    vecs[:, 1] = frame.rho * (uv[:, 1] - frame.cv)
    vecs[:, 2] = 1.0
    return vecs / np.linalg.norm(vecs, axis=1, keepdims=True)


def point_to_image(frame: CameraFrame, p: SpherePoint) -> tuple[float, float] | None:
    """Invert :func:`lift_point`. Returns None for points at infinity."""
    if abs(p[2]) <= DEGENERATE_NORM:
        return None
    x, y = p[0] / p[2], p[1] / p[2]
    return (x / frame.rho + frame.cu, y / frame.rho + frame.cv)


def line_from_image(frame: CameraFrame, a: float, b: float, c: float) -> SphereLine:
    """Lift an image line a*u + b*v + c = 0 to its unit plane normal."""
    vec = np.array([a / frame.rho, b / frame.rho, a * frame.cu + b * frame.cv + c])
    return canonical(unit(vec))


def line_to_image(frame: CameraFrame, l: SphereLine) -> tuple[float, float, float]:
    """Express a sphere line as pixel-space coefficients (a, b, c)."""
    a = l[0] * frame.rho
    b = l[1] * frame.rho
    c = l[2] - (a * frame.cu + b * frame.cv)
    return (float(a), float(b), float(c))


def join(p1: SpherePoint, p2: SpherePoint) -> SphereLine:
    """Line through two points: normalized cross product, canonical sign."""
    cr = np.cross(p1, p2)
    n = float(np.linalg.norm(cr))
    if n <= DEGENERATE_NORM:
        raise DegenerateGeometryError("join of parallel or antipodal points")
    return canonical(cr / n)


def meet(l1: SphereLine, l2: SphereLine) -> SpherePoint:
    """Intersection of two lines: normalized cross product, canonical sign."""
    cr = np.cross(l1, l2)
    n = float(np.linalg.norm(cr))
    if n <= DEGENERATE_NORM:
        raise DegenerateGeometryError("meet of parallel or antipodal lines")
    return canonical(cr / n)


def angle(x: np.ndarray, y: np.ndarray) -> float:
    """Smallest angle between two unit vectors, in [0, pi/2].

    The absolute dot product identifies antipodal representatives, which
    keeps every downstream threshold sign-invariant. The dot product is
    clamped before arccos for safety at near-parallel configurations.
    """
    d = abs(float(np.dot(x, y)))
    return math.acos(min(d, 1.0))


def angles_to(v: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Angle of each row of ``rows`` to the unit vector ``v``."""
    if rows.shape[0] == 0:
        return np.empty(0)
    d = np.abs(rows @ v)
    return np.arccos(np.minimum(d, 1.0))


def point_line_angle(p: SpherePoint, l: SphereLine) -> float:
    """Angular distance from a point to a line's great circle, in [0, pi/2].

    A point lies on a line exactly when their dot product vanishes, so the
    distance is arcsin(|p . l|), zero for incident pairs.
    """
    return math.asin(min(abs(float(np.dot(p, l))), 1.0))


def point_line_angles(p: SpherePoint, lines: np.ndarray) -> np.ndarray:
    """Vectorized :func:`point_line_angle` over line rows."""
    if lines.shape[0] == 0:
        return np.empty(0)
    return np.arcsin(np.minimum(np.abs(lines @ p), 1.0))


def consistency(p: SpherePoint, l: SphereLine, theta_con: float) -> float:
    """Clamped point-line agreement max(theta_con - dist(p, l), 0).

    Maximal (= theta_con) exactly when the point lies on the line.
    """
    if not theta_con > 0:
        raise ValueError("theta_con must be positive")
    return max(theta_con - point_line_angle(p, l), 0.0)


def consistency_matrix(points: np.ndarray, lines: np.ndarray, theta_con: float) -> np.ndarray:
    """(K, N) consistencies between K points and N lines, all unit rows."""
    if not theta_con > 0:
        raise ValueError("theta_con must be positive")
    if points.shape[0] == 0 or lines.shape[0] == 0:
        return np.zeros((points.shape[0], lines.shape[0]))
    theta = np.arcsin(np.minimum(np.abs(points @ lines.T), 1.0))
    return np.maximum(theta_con - theta, 0.0)


def line_image_orientation(frame: CameraFrame, l: SphereLine) -> float:
    """Direction angle of a line in the image plane, folded into [0, pi)."""
    a, b, _ = line_to_image(frame, l)
    return math.atan2(-a, b) % math.pi


def orientation_difference(theta1, theta2):
    """Acute difference of two image orientations, in [0, pi/2]."""
    d = np.abs(np.mod(theta1 - theta2, math.pi))
    return np.minimum(d, math.pi - d)


def null_space_basis(h: SphereLine) -> np.ndarray:
    """Orthonormal 3x2 basis of the plane normal to ``h``.

    Built by Gram-Schmidt against the canonical axis least aligned with
    ``h``, so the basis is deterministic and well conditioned.
    """
    axis = int(np.argmin(np.abs(h)))
    e = np.zeros(3)
    e[axis] = 1.0
    b1 = unit(e - float(np.dot(h, e)) * h)
    b2 = unit(np.cross(h, b1))
    return np.stack([b1, b2], axis=1)
