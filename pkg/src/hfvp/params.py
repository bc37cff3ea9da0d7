"""Algorithm parameters, with the stock defaults used for every dataset."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import CameraFrame


@dataclass(frozen=True)
class AlgorithmParams:
    """Tuning knobs of the detection pipeline.

    Angles are radians. ``n_candidates`` is the number of horizon lines
    sampled per image and ``subset_size`` the number of segments drawn to
    seed VPs on each of them. ``kappa_over_height`` scales the offset
    squash relative to the image height; the calibration scale itself
    lives on :class:`CameraFrame`.
    """

    theta_con: float = math.radians(2.0)
    theta_ver: float = math.radians(10.0)
    theta_hor: float = math.radians(1.5)
    theta_dist: float = math.radians(33.0)
    n_candidates: int = 300
    subset_size: int = 20
    em_iters: int = 3
    ransac_budget: int = 500
    kappa_over_height: float = 0.2

    def __post_init__(self):
        for name in ("theta_con", "theta_ver", "theta_hor", "theta_dist"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.n_candidates < 1 or self.subset_size < 1:
            raise ValueError("n_candidates and subset_size must be at least 1")
        if self.em_iters < 1 or self.ransac_budget < 1:
            raise ValueError("em_iters and ransac_budget must be at least 1")

    def kappa(self, frame: CameraFrame) -> float:
        return self.kappa_over_height * frame.height
