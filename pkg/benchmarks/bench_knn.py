"""Masked kNN: compiled kernel against the numpy fallback.

    python benchmarks/bench_knn.py [--n 4000] [--d 4] [--repeats 3]

Reports the best wall time per backend over a HAM-like workload (every
training row queried against the available cases of several patterns) and
checks that the two backends return identical neighbour lists.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from hamclf.lattice import Pattern
from hamclf.neighbors import BACKENDS, IndexedPoints


def workload(n: int, d: int, seed: int):
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))
    masks = [Pattern.unit(d, 0), Pattern.ones(d), Pattern((1 << (d // 2 + 1)) - 1, d)]
    return X, masks


def run(backend: str, X, masks, k: int):
    index = IndexedPoints(X, backend=backend)
    pos = index.positions(None)
    return [index.k_nearest_positions(w, X, k, pos) for w in masks]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=4000)
    ap.add_argument("--d", type=int, default=4)
    ap.add_argument("--k", type=int, default=20)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    X, masks = workload(args.n, args.d, args.seed)
    results, times = {}, {}
    for backend in sorted(BACKENDS):
        best = float("inf")
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            results[backend] = run(backend, X, masks, args.k)
            best = min(best, time.perf_counter() - t0)
        times[backend] = best
        print(f"{backend:>9}: {best * 1e3:9.1f} ms  (n={args.n}, d={args.d}, k={args.k}, {len(masks)} patterns)")
    if len(results) > 1:
        ref = results["python"]
        same = all(all(np.array_equal(a, b) for a, b in zip(ref, r)) for r in results.values())
        print(f"identical neighbours: {same}")
        if "compiled" in times:
            print(f"speed-up: {times['python'] / times['compiled']:.2f}x")
    else:
        print("compiled backend unavailable; only the fallback was timed")


if __name__ == "__main__":
    main()
