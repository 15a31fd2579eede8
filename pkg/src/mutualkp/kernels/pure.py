"""Pure-numpy implementations of the geometric inner-loop kernels.

The compiled extension (``mutualkp.kernels._core``) mirrors these functions
result-for-result: distances are float64 squared Euclidean norms accumulated
in the same order ((dx*dx + dy*dy) + dz*dz) and every tie is resolved toward
the lowest candidate index. All functions return integer index arrays only;
callers recompute differentiable quantities from the indices.
"""

import numpy as np

_CHUNK = 512


def _sq_dists(query, ref):
    # (P, Q) squared distances, accumulated per-coordinate like the C kernel
    dx = query[:, 0:1] - ref[None, :, 0]
    dy = query[:, 1:2] - ref[None, :, 1]
    dz = query[:, 2:3] - ref[None, :, 2]
    return dx * dx + dy * dy + dz * dz


def fps_indices(points, m, start):
    """Greedy farthest-point sampling: max-min distance, ties -> lowest index."""
    n = points.shape[0]
    out = np.empty(m, dtype=np.int64)
    out[0] = start
    best = _sq_dists(points, points[start : start + 1])[:, 0]
    for i in range(1, m):
        nxt = int(np.argmax(best))
        out[i] = nxt
        d = _sq_dists(points, points[nxt : nxt + 1])[:, 0]
        np.minimum(best, d, out=best)
    return out


def nn_indices(query, ref):
    """Index of the nearest ref point for every query point."""
    p = query.shape[0]
    out = np.empty(p, dtype=np.int64)
    for lo in range(0, p, _CHUNK):
        hi = min(lo + _CHUNK, p)
        out[lo:hi] = np.argmin(_sq_dists(query[lo:hi], ref), axis=1)
    return out


def knn_in_radius(query, ref, k, radius2):
    """k nearest ref indices per query point, restricted to radius2 when >= 0.

    Rows with fewer than k in-radius neighbours are padded by repeating the
    nearest one; a row with none falls back to the globally nearest point.
    """
    p = query.shape[0]
    out = np.empty((p, k), dtype=np.int64)
    for lo in range(0, p, _CHUNK):
        d = _sq_dists(query[lo : min(lo + _CHUNK, p)], ref)
        order = np.argsort(d, axis=1, kind="stable")
        for r in range(d.shape[0]):
            row = order[r]
            if radius2 >= 0.0:
                within = row[d[r, row] <= radius2]
            else:
                within = row
            if within.size == 0:
                within = row[:1]
            if within.size >= k:
                out[lo + r] = within[:k]
            else:
                out[lo + r, : within.size] = within
                out[lo + r, within.size :] = within[0]
    return out


def segment_nn_indices(target, rec, seg_ptr):
    """Per (target point, segment) index of the nearest rec point.

    seg_ptr is the (S+1,) prefix array delimiting each segment's slice of rec;
    returned indices are global into rec.
    """
    t = target.shape[0]
    s = seg_ptr.shape[0] - 1
    out = np.empty((t, s), dtype=np.int64)
    for j in range(s):
        lo, hi = int(seg_ptr[j]), int(seg_ptr[j + 1])
        block = rec[lo:hi]
        for qlo in range(0, t, _CHUNK):
            qhi = min(qlo + _CHUNK, t)
            out[qlo:qhi, j] = lo + np.argmin(_sq_dists(target[qlo:qhi], block), axis=1)
    return out
