"""Geometric inner-loop kernels with a compiled core and a numpy fallback.

The Cython extension ``_core`` is preferred when importable; setting the
environment variable ``MUTUALKP_KERNELS=python`` before import forces the
numpy fallback (``benchmarks/bench_kernels.py`` compares the two). Both
backends implement identical arithmetic and tie rules, so results are
interchangeable bit-for-bit.
"""

import os

import numpy as np

from . import pure

_impl = pure
BACKEND = "python"

if os.environ.get("MUTUALKP_KERNELS", "").lower() not in ("python", "pure"):
    try:
        from . import _core as _compiled

        _impl = _compiled
        BACKEND = "compiled"
    except ImportError:
        pass


def backend():
    """Name of the active kernel backend: 'compiled' or 'python'."""
    return BACKEND


def _as_points(arr, name):
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if out.ndim != 2 or out.shape[1] != 3:
        raise ValueError(f"{name} must have shape (n, 3), got {out.shape}")
    return out


def fps_indices(points, m, start=0):
    """Greedy max-min farthest-point sample indices; ties -> lowest index."""
    pts = _as_points(points, "points")
    n = pts.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"sample count {m} out of range [1, {n}]")
    if not 0 <= start < n:
        raise ValueError(f"start index {start} out of range [0, {n})")
    return _impl.fps_indices(pts, int(m), int(start))


def nn_indices(query, ref):
    """For each query point, the index of its nearest ref point."""
    q = _as_points(query, "query")
    r = _as_points(ref, "ref")
    if r.shape[0] == 0:
        raise ValueError("ref is empty")
    return _impl.nn_indices(q, r)


def knn_indices(query, ref, k):
    """Indices of the k nearest ref points per query point (padded if k > |ref|)."""
    q = _as_points(query, "query")
    r = _as_points(ref, "ref")
    if k < 1 or r.shape[0] == 0:
        raise ValueError("need k >= 1 and a nonempty ref")
    return _impl.knn_in_radius(q, r, int(k), -1.0)


def ball_query(points, centers, radius, k):
    """Up to k nearest in-radius neighbours of each center among points.

    Short rows are padded by repeating the nearest neighbour; a center with
    no in-radius point falls back to its globally nearest one.
    """
    p = _as_points(points, "points")
    c = _as_points(centers, "centers")
    if radius <= 0 or k < 1:
        raise ValueError("need radius > 0 and k >= 1")
    return _impl.knn_in_radius(c, p, int(k), float(radius) * float(radius))


def segment_nn_indices(target, rec, seg_ptr):
    """Per (target point, segment) global index of the nearest rec point."""
    t = _as_points(target, "target")
    r = _as_points(rec, "rec")
    ptr = np.ascontiguousarray(seg_ptr, dtype=np.int64)
    if ptr.ndim != 1 or ptr.shape[0] < 2 or ptr[0] != 0 or ptr[-1] != r.shape[0]:
        raise ValueError("seg_ptr must run from 0 to len(rec)")
    if np.any(np.diff(ptr) < 1):
        raise ValueError("every segment needs at least one point")
    return _impl.segment_nn_indices(t, r, ptr)
