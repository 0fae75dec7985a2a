#!/usr/bin/env python3
"""Timing comparison of the compiled kernels against the NumPy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from zeroreg._kernels import _fallback

try:
    from zeroreg._kernels import _core
except ImportError:
    _core = None


def _time(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    cases = []

    B, N = 512, 2000
    Rs = np.stack([np.linalg.qr(rng.normal(size=(3, 3)))[0] for _ in range(B)])
    Rs *= np.sign(np.linalg.det(Rs))[:, None, None]
    ts = rng.normal(size=(B, 3))
    src = rng.normal(size=(N, 3))
    dst = rng.normal(size=(N, 3))
    cases.append(
        (f"count_inliers_batch B={B} N={N}", "count_inliers_batch",
         (np.ascontiguousarray(Rs), np.ascontiguousarray(ts), src, dst, 0.05))
    )

    Zs = rng.uniform(-10, 10, size=(41, 41))
    cases.append(("sinkhorn_log 41x41 20 iters (per region)", "sinkhorn_log", (Zs, 20)))
    Z = rng.uniform(-10, 10, size=(257, 257))
    cases.append(("sinkhorn_log 257x257 20 iters (global)", "sinkhorn_log", (Z, 20)))

    K, H, W = 200_000, 480, 640
    u = rng.integers(0, W, size=K).astype(np.int64)
    v = rng.integers(0, H, size=K).astype(np.int64)
    z = rng.uniform(0.5, 5.0, size=K)
    cases.append((f"zbuffer_min K={K} {H}x{W}", "zbuffer_min", (u, v, z, H, W)))

    print(f"{'kernel':<42} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for label, name, call_args in cases:
        t_py = _time(getattr(_fallback, name), *call_args, repeats=args.repeats)
        if _core is None:
            print(f"{label:<42} {t_py * 1e3:>8.2f}ms {'n/a':>10} {'n/a':>8}")
            continue
        t_c = _time(getattr(_core, name), *call_args, repeats=args.repeats)
        print(f"{label:<42} {t_py * 1e3:>8.2f}ms {t_c * 1e3:>8.2f}ms {t_py / t_c:>7.1f}x")


if __name__ == "__main__":
    main()
