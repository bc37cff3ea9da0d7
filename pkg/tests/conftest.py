"""Shared fixtures and independent oracles for the test suite."""

import math

import numpy as np
import pytest

from hfvp import make_scene, write_scene_prior
from hfvp.synth import export_scene


def cross_oracle(a, b):
    """Cross product by explicit cofactor arithmetic (independent of numpy)."""
    return np.array(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def ks_statistic(samples, cdf) -> float:
    """Two-sided Kolmogorov-Smirnov distance of samples to a CDF callable."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    f = np.array([cdf(v) for v in x])
    upper = np.max(np.arange(1, n + 1) / n - f)
    lower = np.max(f - np.arange(0, n) / n)
    return float(max(upper, lower))


def ks_critical(n: int, alpha: float = 0.01) -> float:
    # asymptotic critical value; 1.628 is the 1% coefficient
    return 1.628 / math.sqrt(n)


def brute_force_mwis_weight(adj, weights) -> float:
    """Exhaustive 2^n maximum independent set weight, vectorized over masks."""
    n = len(weights)
    total = np.zeros(1)
    valid = np.ones(1, dtype=bool)
    for i in range(n):
        size = 1 << i
        conflict = np.zeros(size, dtype=bool)
        masks = np.arange(size)
        for j in range(i):
            if adj[i, j]:
                conflict |= (masks >> j) & 1 == 1
        total = np.concatenate([total, total + weights[i]])
        valid = np.concatenate([valid, valid & ~conflict])
    return float(total[valid].max())


def random_proximity_graph(rng, max_nodes=20, theta=math.radians(33.0)):
    """Random points on the projective circle with proximity edges."""
    n = int(rng.integers(1, max_nodes + 1))
    phi = rng.uniform(0.0, np.pi, n)
    weights = rng.integers(0, 1 << 20, n).astype(float)  # dyadic: exact float sums
    d = np.abs(phi[:, None] - phi[None, :])
    d = np.minimum(d, np.pi - d)
    adj = np.triu(d <= theta, k=1)
    adj |= adj.T
    nodes = np.stack([np.cos(phi), np.sin(phi), np.zeros(n)], axis=1)
    return nodes, weights, adj, phi


MANHATTAN_SCENE = dict(
    n_families=2, segments_per_family=32, outlier_fraction=0.2, endpoint_noise_px=0.5
)
SINGLE_VP_SCENE = dict(
    n_families=1, segments_per_family=48, outlier_fraction=0.2, endpoint_noise_px=0.5
)
SUITE_SEED = 20240811
SUITE_SIZE = 100


def _build_suite(root, scene_kwargs, with_priors):
    root.mkdir(parents=True, exist_ok=True)
    for idx in range(SUITE_SIZE):
        scene = make_scene(seed=np.random.SeedSequence((SUITE_SEED, idx)), **scene_kwargs)
        stem = f"scene_{idx:04d}"
        export_scene(scene, root, stem)
        if with_priors:
            write_scene_prior(
                scene,
                root / f"{stem}_prior.json",
                sigma_offset_px=5.0,
                sigma_alpha=math.radians(2.0),
                seed=np.random.SeedSequence((SUITE_SEED, idx, 7)),
            )
    return root


@pytest.fixture(scope="session")
def manhattan_suite(tmp_path_factory):
    """100 Manhattan scenes with truth-centered priors, exported to disk."""
    return _build_suite(tmp_path_factory.mktemp("suite_manhattan"), MANHATTAN_SCENE, True)


@pytest.fixture(scope="session")
def single_vp_suite(tmp_path_factory):
    """100 single-horizontal-VP scenes exported to disk."""
    return _build_suite(tmp_path_factory.mktemp("suite_single"), SINGLE_VP_SCENE, False)
