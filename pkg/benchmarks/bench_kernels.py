"""Time each hot kernel under numba and under plain numpy.

Run ``python3 benchmarks/bench_kernels.py [--repeat N]``. Both twins are
called directly, so the ``BAIYIN_DISABLE_NUMBA`` flag does not matter here.
The first numba call of each kernel is made before timing to exclude JIT
compilation.
"""

import argparse
import time

import numpy as np
from scipy.linalg import lapack

from baiyin import kernels
from baiyin.comboracle import column_chains, row_chains


def _cases():
    rng = np.random.default_rng(0)
    u, v = row_chains(4, 5), column_chains(4, 5)
    e = rng.choice([-1.0, 1.0], size=(192, 128))
    x0 = rng.standard_normal(128)
    xs = rng.standard_normal(14)
    a = rng.standard_normal((300, 300))
    c, _, _, tau, _ = lapack.dsytrd(a + a.T, lower=1)
    z = rng.standard_normal((300, 3))
    return {
        "sign_stream(2^20)": ("_sign_stream", (12345, 1 << 20)),
        "count_even_walks(p=n=4,l=5)": ("_count_even_walks", (u, v, 4)),
        "exhaustive_traces(3x5,l=4)": ("_exhaustive_traces", (3, 5, 4, 0, 1 << 15)),
        "sphere_descent(192x128,200)": ("_sphere_descent", (e, x0, 200, 0.1)),
        "sign_average(n=14)": ("_sign_average", (xs,)),
        "apply_reflectors(300,3)": ("_apply_reflectors", (c, tau, z)),
    }


def _time(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        fresh = tuple(a.copy() if isinstance(a, np.ndarray) else a for a in args)
        t0 = time.perf_counter()
        fn(*fresh)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3, help="timing repeats, best is reported")
    args = parser.parse_args(argv)
    print(f"{'kernel':32s} {'numba [s]':>11s} {'numpy [s]':>11s} {'speedup':>8s}")
    for label, (stem, fargs) in _cases().items():
        fast = getattr(kernels, stem + "_numba")
        slow = getattr(kernels, stem + "_numpy")
        fast(*tuple(a.copy() if isinstance(a, np.ndarray) else a for a in fargs))
        t_fast = _time(fast, fargs, args.repeat)
        t_slow = _time(slow, fargs, args.repeat)
        print(f"{label:32s} {t_fast:11.5f} {t_slow:11.5f} {t_slow / t_fast:8.1f}x")


if __name__ == "__main__":
    main()
