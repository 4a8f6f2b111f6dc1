"""Benchmark the compiled per-step kernels against the numpy fallback.

Times the three hot routines (pairwise squared distances, RBF gram matrix,
kernel-weighted drift) at several particle counts and prints the speedup of
the Cython extension over the pure-Python implementation.

Usage: python benchmarks/bench_core.py [--repeats N] [--dims D]
"""
import argparse
import timeit

import numpy as np

from sgldr import _core
from sgldr._core import _kernels_py


def time_call(fn, *args, repeats):
    timer = timeit.Timer(lambda: fn(*args))
    number, _ = timer.autorange()
    return min(timer.repeat(repeats, number)) / number


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--dims", type=int, default=10)
    parser.add_argument("--particles", type=int, nargs="+", default=[10, 50, 100])
    args = parser.parse_args()

    if _core.BACKEND != "cython":
        parser.exit(1, "compiled extension not available; nothing to compare\n")
    from sgldr._core import _kernels_cy

    rng = np.random.default_rng(0)
    print(f"backend in use: {_core.BACKEND}; d = {args.dims}")
    header = f"{'routine':<18} {'K':>5} {'python':>12} {'cython':>12} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for K in args.particles:
        z = np.ascontiguousarray(rng.normal(size=(K, args.dims)))
        g = np.ascontiguousarray(rng.normal(size=(K, args.dims)))
        h = 1.5
        gram = _kernels_cy.rbf_gram(z, h)
        cases = [
            ("pairwise_sq_dists", (z,)),
            ("rbf_gram", (z, h)),
            ("svgd_drift", (z, g, gram, h)),
        ]
        for name, call_args in cases:
            t_py = time_call(getattr(_kernels_py, name), *call_args, repeats=args.repeats)
            t_cy = time_call(getattr(_kernels_cy, name), *call_args, repeats=args.repeats)
            print(f"{name:<18} {K:>5} {t_py * 1e6:>10.1f}us {t_cy * 1e6:>10.1f}us "
                  f"{t_py / t_cy:>7.1f}x")


if __name__ == "__main__":
    main()
