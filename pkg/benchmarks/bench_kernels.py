#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--points N] [--spheres M]
"""

import argparse
import time

import numpy as np

from annumax._kernels import _numpy

try:
    from annumax._kernels import _compiled
except ImportError:
    _compiled = None


def _timeit(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=1_000_000)
    parser.add_argument("--spheres", type=int, default=256)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    pts = np.ascontiguousarray(rng.uniform(-2.0, 2.0, (args.points, 3)))
    centre = np.zeros(3)
    normal = np.ascontiguousarray(np.array([1.0, 0.0, 0.0]))
    centres = np.ascontiguousarray(
        np.column_stack([rng.uniform(-0.3, 0.3, (args.spheres, 2)), np.zeros(args.spheres)])
    )
    radii = np.ascontiguousarray(rng.uniform(1.0, 2.0, args.spheres))
    min_cos = 1.0 - 1.0 / 300.0

    cases = [
        ("annulus_mask", (pts, centre, 1.5, 0.01)),
        ("cap_mask", (pts, centre, 1.5, 0.01, min_cos)),
        ("slab_mask", (pts, normal, 0.25, 0.05)),
        ("cap_count", (pts[: args.points // 10], centres, radii, 0.01, min_cos)),
    ]

    backends = [("numpy", _numpy)]
    if _compiled is not None:
        backends.append(("compiled", _compiled))
    else:
        print("compiled backend unavailable; benchmarking numpy only")

    print(f"{'kernel':<14} " + " ".join(f"{name:>12}" for name, _ in backends) + "  speedup")
    for case_name, case_args in cases:
        times = []
        results = []
        for _, module in backends:
            fn = getattr(module, case_name)
            results.append(fn(*case_args))
            times.append(_timeit(fn, *case_args))
        if len(results) == 2 and not np.array_equal(results[0], results[1]):
            raise AssertionError(f"{case_name}: backends disagree")
        row = f"{case_name:<14} " + " ".join(f"{t * 1e3:>10.1f}ms" for t in times)
        if len(times) == 2:
            row += f"  {times[0] / times[1]:.1f}x"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
