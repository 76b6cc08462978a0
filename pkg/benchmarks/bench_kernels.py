#!/usr/bin/env python3
"""Time the numba and pure-numpy backends of the hot kernels.

Run: python3 benchmarks/bench_kernels.py [--sizes 64,256,512] [--repeats 20]
"""

import argparse
import time

import numpy as np

from qtt import kernels


def bench(fn, args, repeats):
    fn(*args)  # warm-up (and numba compile)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", default="64,256,512")
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    impls = {"numpy": kernels.NUMPY_IMPL}
    nb = kernels.numba_impl()
    if nb is not None:
        impls["numba"] = nb
    else:
        print("numba unavailable; timing numpy only")

    rng = np.random.default_rng(0)
    print(f"{'kernel':<16} {'n':>5} " + " ".join(f"{name:>12}" for name in impls))
    for n in sizes:
        z = rng.normal(size=(n, 16))
        p = rng.normal(size=(n, n))
        p = 0.5 * (p + p.T)
        _, d = kernels.NUMPY_IMPL["matern_gram"](z, 2.0, 0.1)
        rows = {
            "matern_gram": (z, 2.0, 0.1),
            "matern_cross": (z, z[: max(n // 2, 1)], 2.0, 0.1),
            "matern_backward": (p, z, d, 2.0, 0.1),
        }
        for name, call_args in rows.items():
            times = [bench(impl[name], call_args, args.repeats) for impl in impls.values()]
            cells = " ".join(f"{t * 1e3:>10.3f}ms" for t in times)
            print(f"{name:<16} {n:>5} {cells}")


if __name__ == "__main__":
    main()
