"""Compare the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are importable in one process: the fallbacks live beside the
compiled versions in ``ffinr.kernels``. The first numba call is timed
separately because it includes compilation (or a cache load).
"""
import argparse
import time

import numpy as np

from ffinr import kernels
from ffinr._accel import HAVE_NUMBA


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    cases = []
    for n in (256, 1024, 4096):
        x = rng.standard_normal(n)
        cases.append((f"dft n={n}", lambda x=x: kernels.dft_numba(x, x.size // 2 + 1),
                      lambda x=x: kernels.dft_numpy(x, x.size // 2 + 1)))
    for n in (32, 64, 128):
        m = rng.standard_normal((n, n))
        a = m + m.T
        cases.append((f"jacobi n={n}", lambda a=a: kernels.jacobi_numba(a.copy(), 1e-15, 60),
                      lambda a=a: kernels.jacobi_numpy(a.copy(), 1e-15, 60)))

    print(f"numba available: {HAVE_NUMBA}")
    print(f"{'kernel':<16}{'first numba':>14}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for name, fast, slow in cases:
        t0 = time.perf_counter()
        fast()
        first = time.perf_counter() - t0
        tf = best_of(fast, args.repeat)
        ts = best_of(slow, max(1, args.repeat // 2))
        print(f"{name:<16}{first:>13.4f}s{tf:>11.4f}s{ts:>11.4f}s{ts / tf:>9.1f}x")


if __name__ == "__main__":
    main()
