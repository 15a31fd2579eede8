"""Farthest-point subsampling of point clouds."""

from __future__ import annotations

import numpy as np

from . import kernels
from .cloud import PointCloud


def farthest_point_sample(cloud: PointCloud, m: int, seed: int) -> PointCloud:
    """Greedy max-min subsample of m points.

    The first point is a seeded uniform draw (index = default_rng(seed)
    .integers(n)); each later pick maximizes the minimum distance to the
    selected set, ties resolved to the lowest index. Part labels follow
    their points.
    """
    n = len(cloud)
    if not 1 <= m <= n:
        raise ValueError(f"cannot sample {m} points from a cloud of {n}")
    start = int(np.random.default_rng(seed).integers(n))
    idx = kernels.fps_indices(cloud.points, m, start)
    labels = cloud.part_labels[idx] if cloud.part_labels is not None else None
    return cloud.with_points(cloud.points[idx], part_labels=labels)
