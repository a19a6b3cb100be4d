#!/usr/bin/env python3
"""Benchmark the compiled greedy-matching kernel against the pure-numpy
fallback.

The matcher runs once per scored response inside the training loop, so the
per-call constant matters more than asymptotics.  Typical matrices are small
(a handful of candidates against 5-13 references); the sweep covers that
range plus a few larger shapes.

Usage: python benchmarks/bench_matching.py [--reps 2000] [--tau 0.7]
"""

import argparse
import time

import numpy as np

from opreward.matching._greedy_py import greedy_pairs as greedy_py

try:
    from opreward.matching._greedy import greedy_pairs as greedy_cy
except ImportError:
    greedy_cy = None

SHAPES = [(3, 5), (5, 5), (8, 10), (12, 12), (20, 20), (40, 40)]


def bench(kernel, matrices, tau):
    start = time.perf_counter()
    for matrix in matrices:
        kernel(matrix, tau)
    return time.perf_counter() - start


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--reps", type=int, default=2000, help="matrices per shape")
    parser.add_argument("--tau", type=float, default=0.7)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"{'shape':>8}  {'python':>12}  {'cython':>12}  {'speedup':>8}")
    for m, n in SHAPES:
        matrices = [np.ascontiguousarray(rng.uniform(-1, 1, size=(m, n))) for _ in range(args.reps)]
        t_py = bench(greedy_py, matrices, args.tau)
        row = f"{m}x{n:<5}  {t_py / args.reps * 1e6:>10.1f}us"
        if greedy_cy is not None:
            # sanity: identical pairs on the first matrix
            assert greedy_cy(matrices[0].copy(), args.tau) == greedy_py(matrices[0], args.tau)
            t_cy = bench(greedy_cy, matrices, args.tau)
            row += f"  {t_cy / args.reps * 1e6:>10.1f}us  {t_py / t_cy:>7.1f}x"
        else:
            row += f"  {'not built':>12}  {'-':>8}"
        print(row)
    if greedy_cy is None:
        print("\ncompiled kernel unavailable; rebuild with `pip install -e . --no-build-isolation`")


if __name__ == "__main__":
    main()
