#!/usr/bin/env python3
"""Benchmark the segment-mean kernels: numba JIT vs the numpy fallback.

These kernels carry the grouped neighbor aggregation, the only hot loop
in the package. Run after any kernel change; typical speedups on graphs
with a few million adjacency entries are 3-10x for the backward scatter.
"""

import time

import numpy as np

from fgccomp import backends


def make_problem(n_nodes, mean_degree, dim, seed=0):
    rng = np.random.default_rng(seed)
    counts = rng.poisson(mean_degree, size=n_nodes)
    idx = rng.integers(0, n_nodes, size=int(counts.sum())).astype(np.int64)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    values = rng.normal(size=(n_nodes, dim))
    return values, idx, offsets


def time_fn(fn, *args, repeats=20):
    fn(*args)  # warm-up (JIT compilation for the numba path)
    start = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - start) / repeats


def bench(n_nodes, mean_degree, dim):
    values, idx, offsets = make_problem(n_nodes, mean_degree, dim)
    gout = np.random.default_rng(1).normal(size=(n_nodes, dim))

    rows = {"forward numpy": time_fn(backends.segment_mean_numpy,
                                     values, idx, offsets),
            "backward numpy": time_fn(backends.segment_mean_backward_numpy,
                                      gout, idx, offsets, n_nodes)}
    if backends.HAS_NUMBA:
        rows["forward numba"] = time_fn(backends.segment_mean_numba,
                                        values, idx, offsets)
        rows["backward numba"] = time_fn(backends.segment_mean_backward_numba,
                                         gout, idx, offsets, n_nodes)

    print(f"\nnodes={n_nodes} mean_degree={mean_degree} dim={dim} "
          f"({idx.size} adjacency entries)")
    for name, t in rows.items():
        print(f"  {name:16s} {t * 1e3:9.3f} ms")
    if backends.HAS_NUMBA:
        print(f"  forward speedup  {rows['forward numpy'] / rows['forward numba']:.1f}x")
        print(f"  backward speedup {rows['backward numpy'] / rows['backward numba']:.1f}x")


if __name__ == "__main__":
    print("=" * 60)
    print("segment-mean kernel benchmark")
    print(f"active backend: {backends.BACKEND} (numba available: {backends.HAS_NUMBA})")
    print("=" * 60)
    bench(2_000, 10, 16)
    bench(20_000, 10, 32)
    bench(50_000, 40, 32)
