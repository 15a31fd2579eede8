#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the pure-numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]

Also asserts that both backends return identical indices on every case, so
the benchmark doubles as an equivalence check at production sizes.
"""

import argparse
import sys
import time

import numpy as np

from mutualkp.kernels import pure

try:
    from mutualkp.kernels import _core
except ImportError:
    _core = None


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args(argv)

    if _core is None:
        print("compiled backend not built; run: python3 setup.py build_ext --inplace")
        return 1

    rng = np.random.default_rng(0)
    cloud = rng.uniform(-0.5, 0.5, (2048, 3))
    centers = cloud[pure.fps_indices(cloud, 512, 0)]
    rec = rng.uniform(-0.5, 0.5, (2880, 3))
    seg_ptr = np.linspace(0, 2880, 46).astype(np.int64)

    cases = [
        ("fps 2048->512", lambda m: m.fps_indices(cloud, 512, 0)),
        ("ball query 512x2048 k=32", lambda m: m.knn_in_radius(centers, cloud, 32, 0.04)),
        ("nn 2880x2048", lambda m: m.nn_indices(rec, cloud)),
        ("segment nn 2048x45", lambda m: m.segment_nn_indices(cloud, rec, seg_ptr)),
    ]

    print(f"{'kernel':<28} {'numpy':>10} {'compiled':>10} {'speedup':>8}")
    for name, call in cases:
        t_py, out_py = timeit(lambda: call(pure), args.repeats)
        t_c, out_c = timeit(lambda: call(_core), args.repeats)
        if not np.array_equal(out_py, out_c):
            print(f"{name}: BACKEND MISMATCH", file=sys.stderr)
            return 1
        print(f"{name:<28} {t_py * 1e3:>8.2f}ms {t_c * 1e3:>8.2f}ms {t_py / t_c:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
