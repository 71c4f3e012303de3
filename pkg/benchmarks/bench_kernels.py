#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Covers the two hot paths: top-k selection over a score array (first-stage
retrieval) and LCS length (ROUGE-L lexical reranking). Reports best-of-N
wall times and the native speedup.

Usage: python benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from audiorank.kernels import _fallback

try:
    from audiorank.kernels import _native
except ImportError:
    _native = None


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def fmt(seconds):
    if seconds >= 1.0:
        return f"{seconds:8.3f} s "
    return f"{seconds * 1e3:8.3f} ms"


def bench_case(label, native_fn, fallback_fn, repeats):
    fallback_t = best_of(fallback_fn, repeats)
    if _native is None:
        print(f"{label:<42} fallback {fmt(fallback_t)}   native unavailable")
        return
    native_t = best_of(native_fn, repeats)
    speedup = fallback_t / native_t if native_t > 0 else float("inf")
    print(
        f"{label:<42} fallback {fmt(fallback_t)}   native {fmt(native_t)}   x{speedup:6.1f}"
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5, help="best-of repetitions per case")
    args = parser.parse_args()

    rng = np.random.default_rng(0)

    print("== top-k selection from a score array ==")
    for n, k in ((8_000, 1000), (100_000, 1000), (1_000_000, 100)):
        scores = rng.standard_normal(n)
        bench_case(
            f"topk n={n:>9,} k={k}",
            lambda s=scores, kk=k: _native.topk_from_scores(s, kk),
            lambda s=scores, kk=k: _fallback.topk_from_scores(s, kk),
            args.repeats,
        )
        if _native is not None:
            a = _native.topk_from_scores(scores, k)
            b = _fallback.topk_from_scores(scores, k)
            assert (a == b).all(), "implementations disagree"

    print("\n== LCS length (ROUGE-L core) ==")
    for la, lb in ((300, 300), (1500, 1500), (4000, 2000)):
        a = rng.integers(0, 2000, la).astype(np.int64)
        b = rng.integers(0, 2000, lb).astype(np.int64)
        bench_case(
            f"lcs |a|={la:>5} |b|={lb:>5}",
            lambda x=a, y=b: _native.lcs_length(x, y),
            lambda x=a, y=b: _fallback.lcs_length(x, y),
            args.repeats,
        )
        if _native is not None:
            assert _native.lcs_length(a, b) == _fallback.lcs_length(a, b)

    if _native is None:
        print("\ncompiled extension not built; install with Cython + a C compiler to compare")


if __name__ == "__main__":
    main()
