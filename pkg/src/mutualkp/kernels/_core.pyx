# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled geometric kernels; mirrors mutualkp.kernels.pure result-for-result.

Compiled with -ffp-contract=off so squared distances match the numpy fallback
bit-for-bit; ties always resolve to the lowest candidate index.
"""

import numpy as np

from libc.math cimport INFINITY


def fps_indices(double[:, ::1] points, Py_ssize_t m, Py_ssize_t start):
    cdef Py_ssize_t n = points.shape[0]
    out_arr = np.empty(m, dtype=np.int64)
    best_arr = np.empty(n, dtype=np.float64)
    cdef long long[::1] out = out_arr
    cdef double[::1] best = best_arr
    cdef Py_ssize_t i, j, nxt
    cdef double dx, dy, dz, d, hi

    out[0] = start
    for j in range(n):
        dx = points[j, 0] - points[start, 0]
        dy = points[j, 1] - points[start, 1]
        dz = points[j, 2] - points[start, 2]
        best[j] = (dx * dx + dy * dy) + dz * dz
    for i in range(1, m):
        nxt = 0
        hi = best[0]
        for j in range(1, n):
            if best[j] > hi:
                hi = best[j]
                nxt = j
        out[i] = nxt
        for j in range(n):
            dx = points[j, 0] - points[nxt, 0]
            dy = points[j, 1] - points[nxt, 1]
            dz = points[j, 2] - points[nxt, 2]
            d = (dx * dx + dy * dy) + dz * dz
            if d < best[j]:
                best[j] = d
    return out_arr


def nn_indices(double[:, ::1] query, double[:, ::1] ref):
    cdef Py_ssize_t p = query.shape[0]
    cdef Py_ssize_t q = ref.shape[0]
    out_arr = np.empty(p, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef Py_ssize_t i, j, arg
    cdef double dx, dy, dz, d, lo

    for i in range(p):
        arg = 0
        lo = INFINITY
        for j in range(q):
            dx = query[i, 0] - ref[j, 0]
            dy = query[i, 1] - ref[j, 1]
            dz = query[i, 2] - ref[j, 2]
            d = (dx * dx + dy * dy) + dz * dz
            if d < lo:
                lo = d
                arg = j
        out[i] = arg
    return out_arr


def knn_in_radius(double[:, ::1] query, double[:, ::1] ref, Py_ssize_t k, double radius2):
    cdef Py_ssize_t p = query.shape[0]
    cdef Py_ssize_t q = ref.shape[0]
    out_arr = np.empty((p, k), dtype=np.int64)
    buf_arr = np.empty(q, dtype=np.float64)
    cdef long long[:, ::1] out = out_arr
    cdef double[::1] buf = buf_arr
    cdef Py_ssize_t i, j, t, arg
    cdef double dx, dy, dz, lo

    for i in range(p):
        for j in range(q):
            dx = query[i, 0] - ref[j, 0]
            dy = query[i, 1] - ref[j, 1]
            dz = query[i, 2] - ref[j, 2]
            buf[j] = (dx * dx + dy * dy) + dz * dz
        for t in range(k):
            arg = -1
            lo = INFINITY
            for j in range(q):
                if buf[j] < lo:
                    lo = buf[j]
                    arg = j
            if arg < 0:
                # every candidate consumed; repeat the nearest
                out[i, t] = out[i, 0]
            elif t > 0 and radius2 >= 0.0 and lo > radius2:
                out[i, t] = out[i, 0]
            else:
                # slot 0 always takes the global nearest, even out of radius
                out[i, t] = arg
                buf[arg] = INFINITY
    return out_arr


def segment_nn_indices(double[:, ::1] target, double[:, ::1] rec, long long[::1] seg_ptr):
    cdef Py_ssize_t t = target.shape[0]
    cdef Py_ssize_t s = seg_ptr.shape[0] - 1
    out_arr = np.empty((t, s), dtype=np.int64)
    cdef long long[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, r, lo_i, hi_i, arg
    cdef double dx, dy, dz, d, lo

    for i in range(t):
        for j in range(s):
            lo_i = seg_ptr[j]
            hi_i = seg_ptr[j + 1]
            arg = lo_i
            lo = INFINITY
            for r in range(lo_i, hi_i):
                dx = target[i, 0] - rec[r, 0]
                dy = target[i, 1] - rec[r, 1]
                dz = target[i, 2] - rec[r, 2]
                d = (dx * dx + dy * dy) + dz * dz
                if d < lo:
                    lo = d
                    arg = r
            out[i, j] = arg
    return out_arr
