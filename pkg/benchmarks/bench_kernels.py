"""Throughput comparison of the compiled vs pure-Python sampling kernels.

Usage: python benchmarks/bench_kernels.py [--vocab N] [--iters N]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from pcmi.kernels import KERNEL_BACKEND, implementations


def make_inputs(rng, vocab_size):
    uni = rng.dirichlet(np.ones(vocab_size))
    n_bi = max(2, vocab_size // 20)
    n_tri = max(2, vocab_size // 100)
    bi_ids = rng.choice(vocab_size, size=n_bi, replace=False).astype(np.int64)
    tri_ids = rng.choice(vocab_size, size=n_tri, replace=False).astype(np.int64)
    bi_counts = rng.integers(1, 50, size=n_bi).astype(np.float64)
    tri_counts = rng.integers(1, 20, size=n_tri).astype(np.float64)
    return uni, bi_ids, bi_counts, float(bi_counts.sum()), tri_ids, tri_counts, float(tri_counts.sum())


def bench(impl, inputs_list, iters):
    start = time.perf_counter()
    picked = 0
    for i in range(iters):
        uni, bi_ids, bi_counts, bi_total, tri_ids, tri_counts, tri_total = inputs_list[i % len(inputs_list)]
        probs = impl.mix_distribution(
            uni.copy(), bi_ids, bi_counts, bi_total, tri_ids, tri_counts, tri_total,
            0.6, 0.3, 0.1,
        )
        picked += impl.nucleus_pick(probs, 0.9, 0.9, (i * 0.618034) % 1.0)
    elapsed = time.perf_counter() - start
    return elapsed, picked


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--vocab", type=int, default=5000)
    parser.add_argument("--iters", type=int, default=2000)
    args = parser.parse_args()

    rng = np.random.default_rng(7)
    inputs_list = [make_inputs(rng, args.vocab) for _ in range(32)]

    print(f"active backend: {KERNEL_BACKEND}; vocab={args.vocab}, iters={args.iters}")
    results = {}
    checksums = {}
    for name, impl in implementations().items():
        bench(impl, inputs_list, 50)  # warm-up
        elapsed, picked = bench(impl, inputs_list, args.iters)
        results[name] = elapsed
        checksums[name] = picked
        print(f"{name:>8}: {elapsed:.3f}s  ({args.iters / elapsed:,.0f} draws/s)")

    if len(results) == 2:
        speedup = results["python"] / results["cython"]
        agree = checksums["python"] == checksums["cython"]
        print(f"speedup: {speedup:.2f}x (cython over python); outputs identical: {agree}")


if __name__ == "__main__":
    main()
