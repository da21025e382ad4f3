#!/usr/bin/env python3
"""Benchmark the compiled clustering kernels against the pure-Python fallback.

Times the pairwise distance matrix and the full merge loop per linkage for
growing group sizes, then prints a speedup table. Both backends produce
identical merge sequences (asserted here on every run), so the numbers
compare like with like.

Usage: python benchmarks/bench_kernels.py [--max-n 800] [--repeat 3]
"""

import argparse
import math
import random
import time

import numpy as np

from lacclean.kernels import _pykernels

try:
    from lacclean.kernels import _ckernels
except ImportError:
    _ckernels = None

LINKAGES = {"single": 0, "complete": 1, "average": 2, "centroid": 3}


def make_group(rng, n):
    lats = np.array([42.0 + rng.uniform(-0.3, 0.3) for _ in range(n)])
    lons = np.array([-71.0 + rng.uniform(-0.3, 0.3) for _ in range(n)])
    cids = np.array(rng.sample(range(1, 10 * n), n), dtype=np.int64)
    return lats, lons, cids


def best_of(repeat, fn):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--max-n", type=int, default=800)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if _ckernels is None:
        print("compiled kernels unavailable; build the extension first "
              "(pip install -e . --no-build-isolation)")
        return

    rng = random.Random(12345)
    sizes = [n for n in (50, 100, 200, 400, 800) if n <= args.max_n]

    print(f"{'op':<22}{'n':>6}{'python':>12}{'compiled':>12}{'speedup':>10}")
    for n in sizes:
        lats, lons, cids = make_group(rng, n)
        tp, dp = best_of(args.repeat, lambda: _pykernels.pairwise_distances(lats, lons, 0))
        tc, dc = best_of(args.repeat, lambda: _ckernels.pairwise_distances(lats, lons, 0))
        assert np.array_equal(dp, dc)
        print(f"{'pairwise_distances':<22}{n:>6}{tp:>11.4f}s{tc:>11.4f}s{tp / tc:>9.1f}x")

    for name, code in LINKAGES.items():
        for n in sizes:
            if code == 3 and n > 400:
                continue  # centroid is O(n^3); keep the python side bearable
            lats, lons, cids = make_group(rng, n)
            d = _ckernels.pairwise_distances(lats, lons, 0)
            tp, rp = best_of(
                args.repeat,
                lambda: _pykernels.agglomerate_merges(d, lats, lons, cids, code, 0, math.inf),
            )
            tc, rc = best_of(
                args.repeat,
                lambda: _ckernels.agglomerate_merges(d, lats, lons, cids, code, 0, math.inf),
            )
            assert np.array_equal(rp[0], rc[0]) and np.array_equal(rp[1], rc[1])
            print(f"{'agglomerate/' + name:<22}{n:>6}{tp:>11.4f}s{tc:>11.4f}s{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
