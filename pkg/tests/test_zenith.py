import math

import numpy as np
import pytest

from hfvp.geometry import CameraFrame, angle, line_to_image, point_line_angles
from hfvp.params import AlgorithmParams
from hfvp.prior import no_context_prior
from hfvp.segments import SegmentSet
from hfvp.synth import make_scene
from hfvp.zenith import detect_zenith, initial_zenith_direction

FRAME = CameraFrame(640, 480)
PARAMS = AlgorithmParams()


class FakePrior:
    def __init__(self, slope):
        self.slope = slope

    def map_slope(self):
        return self.slope


class TestInitialZenithDirection:
    def test_zero_roll_gives_vertical_line(self):
        d = initial_zenith_direction(no_context_prior(FRAME), FRAME)
        e = np.array([1.0, 0.0, 0.0])
        assert min(np.linalg.norm(d - e), np.linalg.norm(d + e)) < 1e-12

    def test_quarter_turn_slope(self):
        d = initial_zenith_direction(FakePrior(math.pi / 4), FRAME)
        a, b, c = line_to_image(FRAME, d)
        # line direction at 135 degrees through the center
        direction = math.atan2(-a, b) % math.pi
        assert direction == pytest.approx(3 * math.pi / 4, abs=1e-9)
        assert a * 320 + b * 240 + c == pytest.approx(0.0, abs=1e-9)

    def test_perpendicular_to_horizon_slope(self):
        rng = np.random.default_rng(0)
        for slope in rng.uniform(-math.pi / 2, math.pi / 2, 50):
            d = initial_zenith_direction(FakePrior(float(slope)), FRAME)
            a, b, _ = line_to_image(FRAME, d)
            zen_dir = np.array([b, -a])
            zen_dir /= np.linalg.norm(zen_dir)
            hor_dir = np.array([math.cos(slope), math.sin(slope)])
            assert abs(float(zen_dir @ hor_dir)) < 1e-9


def vertical_scene(seed, outliers, noise):
    frac = outliers / (50.0 + outliers) if outliers else 0.0
    return make_scene(
        n_families=0,
        segments_per_family=50,
        outlier_fraction=frac,
        endpoint_noise_px=noise,
        fov=60.0,
        pitch=8.0,
        roll=2.0,
        seed=seed,
    )


class TestDetectZenith:
    def test_exact_vertical_family(self):
        scene = vertical_scene(seed=0, outliers=0, noise=0.0)
        init = initial_zenith_direction(no_context_prior(scene.frame), scene.frame)
        z = detect_zenith(scene.segments, init, PARAMS, seed=0)
        assert z.used_ransac
        assert math.degrees(angle(z.zenith_vp, scene.gt_zenith)) < 0.2

    def test_with_outliers(self):
        scene = vertical_scene(seed=1, outliers=50, noise=0.5)
        init = initial_zenith_direction(no_context_prior(scene.frame), scene.frame)
        z = detect_zenith(scene.segments, init, PARAMS, seed=1)
        assert z.used_ransac
        assert math.degrees(angle(z.zenith_vp, scene.gt_zenith)) < 0.5
        family = set(scene.vp_families[0][1])
        recovered = family & set(z.inlier_ids.tolist())
        assert len(recovered) >= 0.9 * len(family)

    def test_all_horizontal_falls_back(self):
        rows = np.array([[50.0 + i, 100.0, 150.0 + i, 100.0 + i * 0.1] for i in range(20)])
        segs = SegmentSet(FRAME, rows)
        init = initial_zenith_direction(no_context_prior(FRAME), FRAME)
        z = detect_zenith(segs, init, PARAMS, seed=0)
        assert not z.used_ransac
        assert z.zenith_vp is None
        assert np.array_equal(z.zenith_dir, init)

    def test_single_candidate_falls_back(self):
        segs = SegmentSet(FRAME, np.array([[320.0, 100.0, 320.0, 300.0]]))
        init = initial_zenith_direction(no_context_prior(FRAME), FRAME)
        z = detect_zenith(segs, init, PARAMS, seed=0)
        assert not z.used_ransac

    def test_deterministic(self):
        scene = vertical_scene(seed=2, outliers=50, noise=0.5)
        init = initial_zenith_direction(no_context_prior(scene.frame), scene.frame)
        a = detect_zenith(scene.segments, init, PARAMS, seed=3)
        b = detect_zenith(scene.segments, init, PARAMS, seed=3)
        assert np.array_equal(a.zenith_dir, b.zenith_dir)
        assert np.array_equal(a.inlier_ids, b.inlier_ids)

    def test_inliers_consistent_with_vp(self):
        scene = vertical_scene(seed=4, outliers=50, noise=0.5)
        init = initial_zenith_direction(no_context_prior(scene.frame), scene.frame)
        z = detect_zenith(scene.segments, init, PARAMS, seed=4)
        dists = point_line_angles(z.zenith_vp, scene.segments.lines[z.inlier_ids])
        assert np.all(PARAMS.theta_con - dists > 0)

    def test_zenith_dir_through_principal_point(self):
        scene = vertical_scene(seed=5, outliers=30, noise=0.5)
        init = initial_zenith_direction(no_context_prior(scene.frame), scene.frame)
        z = detect_zenith(scene.segments, init, PARAMS, seed=5)
        pp_lift = np.array([0.0, 0.0, 1.0])
        assert abs(float(np.dot(z.zenith_dir, pp_lift))) < 1e-9

    def test_svd_local_optimality(self):
        scene = vertical_scene(seed=6, outliers=50, noise=0.5)
        init = initial_zenith_direction(no_context_prior(scene.frame), scene.frame)
        z = detect_zenith(scene.segments, init, PARAMS, seed=6)
        lines = scene.segments.lines[z.inlier_ids]
        base = float(np.sum((lines @ z.zenith_vp) ** 2))
        # perturb by 0.1 degrees along tangent directions
        t1 = np.cross(z.zenith_vp, [1.0, 0.0, 0.0])
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(z.zenith_vp, t1)
        eps = math.radians(0.1)
        for k in range(8):
            phi = 2 * math.pi * k / 8
            d = math.cos(phi) * t1 + math.sin(phi) * t2
            p = z.zenith_vp * math.cos(eps) + d * math.sin(eps)
            assert float(np.sum((lines @ p) ** 2)) >= base - 1e-12
