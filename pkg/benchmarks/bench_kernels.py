#!/usr/bin/env python3
"""Benchmark the compiled recursion kernels against the pure-Python fallback.

Run:  python benchmarks/bench_kernels.py [--sizes 1000,5000,20000]
"""

import argparse
import time

import numpy as np

from volwatch import _kernels_py
from volwatch.qmle import fit_qmle

try:
    from volwatch import _speedups
except ImportError:
    _speedups = None


def _time(fn, *args, min_seconds=0.2):
    fn(*args)  # warm-up
    n, t0 = 0, time.perf_counter()
    while time.perf_counter() - t0 < min_seconds:
        fn(*args)
        n += 1
    return (time.perf_counter() - t0) / n


def bench_kernels(sizes):
    rng = np.random.default_rng(0)
    rows = []
    for m in sizes:
        eps = rng.standard_normal(m + 1)
        ls = _kernels_py.simulate_log_variance(eps, np.log(0.5), 0.1, 0.18,
                                               0.8, 0, 0, 0, 0)
        y = np.exp(ls / 2) * eps

        cases = {
            "simulate_log_variance": (eps, np.log(0.5), 0.1, 0.18, 0.8,
                                      0.1, 0.18, 0.9, m // 2),
            "nll_grad": (y[1:], y[0] ** 2, ls[0], 0.1, 0.2, 0.7),
            "score_filter": (y[1:], y[0] ** 2, ls[0], 0.0, 0.0, 0.0,
                             0.1, 0.2, 0.7),
            "sim_score_filter": (eps, 0.1, 0.18, 0.9, np.log(0.5),
                                 0.1, 0.18, 0.8, np.log(0.5)),
        }
        for name, args in cases.items():
            t_py = _time(getattr(_kernels_py, name), *args)
            if _speedups is not None:
                t_c = _time(getattr(_speedups, name), *args)
                rows.append((name, m, t_py, t_c, t_py / t_c))
            else:
                rows.append((name, m, t_py, float("nan"), float("nan")))
    return rows


def bench_fit(m=2_000):
    eps = np.random.default_rng(1).standard_normal(m + 1)
    ls = _kernels_py.simulate_log_variance(eps, np.log(0.5), 0.1, 0.18, 0.8,
                                           0, 0, 0, 0)
    y = (np.exp(ls / 2) * eps)[1:]
    return _time(lambda: fit_qmle(y, lattice=1, seed=0), min_seconds=1.0)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="1000,5000,20000")
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if _speedups is None:
        print("compiled extension not available; timing the fallback only\n")

    print(f"{'kernel':<24}{'n':>8}{'python':>12}{'compiled':>12}{'speedup':>10}")
    for name, m, t_py, t_c, ratio in bench_kernels(sizes):
        c = f"{t_c * 1e3:10.3f}ms" if t_c == t_c else "         --"
        r = f"{ratio:9.0f}x" if ratio == ratio else "        --"
        print(f"{name:<24}{m:>8}{t_py * 1e3:10.3f}ms{c}{r}")

    t_fit = bench_fit()
    print(f"\nfull QMLE fit (m=2000, current backend): {t_fit * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
