"""Farthest-point sampling against a brute-force oracle."""

import numpy as np
import pytest

from helpers import rand_cloud
from mutualkp.cloud import PointCloud
from mutualkp.sampling import farthest_point_sample
from oracles import brute_fps, min_pairwise_distance, worst_subset_min_pairwise


def test_fps_full_sample_is_permutation():
    cloud = rand_cloud(np.random.default_rng(0), 15)
    out = farthest_point_sample(cloud, 15, seed=1)
    assert sorted(map(tuple, out.points)) == sorted(map(tuple, cloud.points))


def test_fps_collinear_endpoints():
    pts = np.array([[0.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0], [3.0, 0, 0]])
    seed = next(s for s in range(100)
                if int(np.random.default_rng(s).integers(4)) == 0)
    out = farthest_point_sample(PointCloud(pts), 2, seed=seed)
    np.testing.assert_array_equal(out.points, [[0.0, 0, 0], [3.0, 0, 0]])


@pytest.mark.parametrize("seed", [0, 7, 19])
def test_fps_matches_brute_force_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    cloud = rand_cloud(rng, 50)
    expected = brute_fps([tuple(p) for p in cloud.points], 10, seed)
    out = farthest_point_sample(cloud, 10, seed=seed)
    np.testing.assert_array_equal(out.points, cloud.points[expected])


def test_fps_output_is_subset():
    cloud = rand_cloud(np.random.default_rng(2), 80)
    out = farthest_point_sample(cloud, 20, seed=3)
    rows = {tuple(p) for p in cloud.points}
    assert all(tuple(p) in rows for p in out.points)


def test_fps_carries_part_labels():
    cloud = rand_cloud(np.random.default_rng(3), 30, labels=True)
    out = farthest_point_sample(cloud, 10, seed=0)
    lookup = {tuple(p): l for p, l in zip(cloud.points, cloud.part_labels)}
    assert all(lookup[tuple(p)] == l for p, l in zip(out.points, out.part_labels))


def test_fps_beats_worst_random_subset_on_small_instances():
    rng = np.random.default_rng(4)
    for n, m in [(8, 3), (10, 4), (12, 5)]:
        pts = rng.uniform(-0.5, 0.5, (n, 3))
        cloud = PointCloud(pts)
        out = farthest_point_sample(cloud, m, seed=11)
        idx = [int(np.flatnonzero((pts == p).all(axis=1))[0]) for p in out.points]
        fps_min = min_pairwise_distance([tuple(p) for p in pts], idx)
        worst = worst_subset_min_pairwise([tuple(p) for p in pts], m)
        assert fps_min >= worst - 1e-12


def test_fps_rejects_bad_counts():
    cloud = rand_cloud(np.random.default_rng(5), 10)
    with pytest.raises(ValueError):
        farthest_point_sample(cloud, 11, seed=0)
    with pytest.raises(ValueError):
        farthest_point_sample(cloud, 0, seed=0)
