"""Shared test builders and finite-difference utilities."""

import numpy as np
import torch

from mutualkp.cloud import PointCloud
from mutualkp.decoder import SkeletonReconstruction


def rand_cloud(rng, n, category="test", cloud_id="c0", labels=False):
    pts = rng.uniform(-0.5, 0.5, (n, 3))
    part = rng.integers(0, 3, n) if labels else None
    return PointCloud(pts, part, category=category, id=cloud_id)


def make_rec(segments, activations, requires_grad=False):
    """SkeletonReconstruction from explicit per-segment point lists."""
    seg_arrays = [np.asarray(s, dtype=np.float64) for s in segments]
    points = torch.tensor(np.concatenate(seg_arrays), requires_grad=requires_grad)
    ptr = np.cumsum([0] + [len(s) for s in seg_arrays]).astype(np.int64)
    pairs = np.array([(0, i + 1) for i in range(len(seg_arrays))], dtype=np.int64)
    arcs = torch.cat([torch.linspace(0, 1, len(s), dtype=torch.float64) for s in seg_arrays])
    acts = torch.tensor(np.asarray(activations, dtype=np.float64),
                        requires_grad=requires_grad)
    return SkeletonReconstruction(
        points=points, seg_ptr=ptr, seg_pairs=pairs, arc_pos=arcs,
        activations=acts, offsets=torch.zeros_like(points.detach()),
    )


def rand_rec(rng, n_segments, max_points=4, requires_grad=False):
    segments = [
        rng.uniform(-0.5, 0.5, (int(rng.integers(2, max_points + 1)), 3))
        for _ in range(n_segments)
    ]
    activations = rng.uniform(0.05, 0.95, n_segments)
    return segments, activations, make_rec(segments, activations, requires_grad)


def fd_gradient(f, x: torch.Tensor, h: float = 1e-4) -> np.ndarray:
    """Central finite differences of a scalar function over a tensor."""
    grad = np.zeros(x.numel())
    flat = x.detach().clone().reshape(-1)
    with torch.no_grad():
        for i in range(flat.numel()):
            for sign in (1.0, -1.0):
                bumped = flat.clone()
                bumped[i] += sign * h
                val = f(bumped.reshape(x.shape))
                grad[i] += sign * float(val)
    return grad / (2 * h)


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.abs(a).max(), np.abs(b).max(), 1e-12)
    return float(np.abs(a - b).max() / denom)
