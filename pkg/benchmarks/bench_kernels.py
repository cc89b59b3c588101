"""Compare the compiled and NumPy kernels.

Run from the repository root after installing the package::

    python benchmarks/bench_kernels.py [--repeat 200]

Prints mean wall time per call of the Lagrangian value/gradient kernel for a
few problem sizes, for both backends, and the speed-up.
"""

import argparse
import timeit

import numpy as np

from isacpack import _pykernels

try:
    from isacpack import _kernels
except ImportError:  # extension not built
    _kernels = None

SIZES = [(2, 8), (4, 64), (8, 64), (16, 64)]


def _args(M, N, seed=0):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(M * N)
    gains = np.sort(rng.uniform(0, 64, N))[::-1].copy()
    s0 = rng.standard_normal(N) / np.sqrt(N)
    lam = rng.uniform(0, 1, M * (M - 1))
    v = rng.uniform(0, 1, M)
    return z, M, N, gains, s0, 4.0, 0.09, lam, v, 10.0, np.empty(M * N)


def bench(mod, M, N, repeat):
    args = _args(M, N)
    t = timeit.timeit(lambda: mod.lagrangian_value_grad(*args), number=repeat)
    return t / repeat


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    a = ap.parse_args()
    print(f"{'M':>3} {'N':>4} {'numpy [us]':>12} {'cython [us]':>12} {'speed-up':>9}")
    for M, N in SIZES:
        tp = bench(_pykernels, M, N, a.repeat)
        if _kernels is None:
            print(f"{M:>3} {N:>4} {tp * 1e6:12.2f} {'n/a':>12} {'n/a':>9}")
            continue
        tc = bench(_kernels, M, N, a.repeat)
        print(f"{M:>3} {N:>4} {tp * 1e6:12.2f} {tc * 1e6:12.2f} {tp / tc:9.1f}")


if __name__ == "__main__":
    main()
