"""Benchmark the numba kernels against the pure-numpy fallbacks.

Run with ``python benchmarks/bench_backends.py``. The numba variants are
compiled (and warmed) before timing; reported numbers are the best of
several repetitions, so they measure steady-state throughput rather than
JIT latency.
"""

import time

import numpy as np

from retrace._kernels import build_impls


def best_of(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def workloads(rng):
    big = rng.normal(size=(1000, 2))
    other = rng.normal(size=(800, 2))
    means = rng.normal(size=(8, 2))
    variances = rng.uniform(0.1, 2.0, size=(8, 2))
    dense = rng.normal(size=(5000, 2))

    blob_a = rng.normal(loc=(0.0, 0.0), scale=1.0, size=(100, 2))
    blob_b = rng.normal(loc=(1.5, 1.5), scale=1.0, size=(100, 2))
    pts = np.vstack([blob_a, blob_b])
    y = np.array([1.0] * 100 + [-1.0] * 100)
    kmat_np = build_impls(False)["rbf_kernel"](pts, pts, 0.5)
    kmat = np.ascontiguousarray(kmat_np)

    return [
        ("pairwise_sq_dists (1000x800)",
         lambda impl: impl["pairwise_sq_dists"](big, other)),
        ("rbf_kernel (1000x800)",
         lambda impl: impl["rbf_kernel"](big, other, 0.5)),
        ("gmm_log_pdf (5000x8)",
         lambda impl: impl["gmm_log_pdf"](dense, means, variances)),
        ("smo_solve (200 pts, overlapping)",
         lambda impl: impl["smo_solve"](kmat, y, 1.0, 1e-3, 1e-12, 10_000)),
    ]


def main():
    rng = np.random.default_rng(0)
    numpy_impls = build_impls(False)
    try:
        numba_impls = build_impls(True)
    except ImportError:
        print("numba not installed; nothing to compare")
        return

    cases = workloads(rng)
    print("warming up numba kernels (compilation)...")
    for _, call in cases:
        call(numba_impls)

    header = f"{'kernel':36s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for name, call in cases:
        t_np = best_of(lambda: call(numpy_impls))
        t_nb = best_of(lambda: call(numba_impls))
        print(f"{name:36s} {t_np * 1e3:9.2f}ms {t_nb * 1e3:9.2f}ms "
              f"{t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
