"""Compare the numba and numpy permutation kernels.

Usage: python benchmarks/bench_kernels.py [--max-n 9] [--repeats 3]

Both implementations are called directly, so the NETDISRUPT_DISABLE_NUMBA
flag does not matter here. JIT compilation is triggered once before timing.
"""

import argparse
import math
import time

import numpy as np

from netdisrupt import _kernels


def _random_pair(n, rng):
    a = np.triu((rng.random((n, n)) < 0.4).astype(float), 1)
    b = np.triu((rng.random((n, n)) < 0.4).astype(float), 1)
    return a + a.T, b + b.T


def _best_of(fn, repeats):
    best = math.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--min-n", type=int, default=5)
    parser.add_argument("--max-n", type=int, default=9)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    print(f"numba available: {_kernels.NUMBA_AVAILABLE}")
    if _kernels.NUMBA_AVAILABLE:
        A, B = _random_pair(4, rng)
        t0 = time.perf_counter()
        _kernels.overlap_all_permutations_nb(A, B)
        print(f"JIT warm-up: {time.perf_counter() - t0:.2f} s")

    print(f"{'n':>3} {'perms':>9} {'numpy s':>10} {'numba s':>10} {'speedup':>8} agree")
    for n in range(args.min_n, args.max_n + 1):
        A, B = _random_pair(n, rng)
        t_np, r_np = _best_of(lambda: _kernels.overlap_all_permutations_np(A, B), args.repeats)
        if _kernels.NUMBA_AVAILABLE:
            t_nb, r_nb = _best_of(lambda: _kernels.overlap_all_permutations_nb(A, B), args.repeats)
            agree = bool(np.array_equal(r_np, r_nb))
            print(f"{n:>3} {math.factorial(n):>9} {t_np:>10.4f} {t_nb:>10.4f} {t_np / t_nb:>8.1f} {agree}")
        else:
            print(f"{n:>3} {math.factorial(n):>9} {t_np:>10.4f} {'-':>10} {'-':>8} -")


if __name__ == "__main__":
    main()
