"""Compare the compiled and pure-Python Jacobi kernels.

Usage: python3 benchmarks/bench_jacobi.py [--sizes 8 16 32 64] [--repeats 5]
"""

import argparse
import time

import numpy as np

from qcqp_exact import linalg


def bench(backend, S, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        linalg.jacobi_eigh(S, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[8, 16, 32, 64])
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"compiled kernel available: {linalg.HAVE_COMPILED}")
    print(f"{'n':>4} {'python ms':>11} {'compiled ms':>12} {'numpy ms':>9} {'speedup':>8}")
    for n in args.sizes:
        M = rng.standard_normal((n, n))
        S = M + M.T
        tp = bench("python", S, args.repeats)
        tc = bench("compiled", S, args.repeats) if linalg.HAVE_COMPILED else float("nan")
        t0 = time.perf_counter()
        for _ in range(args.repeats):
            np.linalg.eigh(S)
        tn = (time.perf_counter() - t0) / args.repeats
        print(f"{n:>4} {1e3 * tp:>11.3f} {1e3 * tc:>12.3f} {1e3 * tn:>9.3f} {tp / tc:>8.1f}")


if __name__ == "__main__":
    main()
