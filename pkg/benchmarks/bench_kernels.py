#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure NumPy fallback.

Workloads mirror one boosting iteration at desk scale: batched mixture
quantiles (the decomposition transport map and loss evaluation), posterior
responsibilities, weighted empirical quantiles, and the CART split scan.

Usage:
    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from wassmix import _kernels as py_kernels

try:
    from wassmix import _kernels_c as c_kernels
except ImportError:
    c_kernels = None


def make_workloads(rng):
    n_rows, n_atoms, n_comp, n_levels = 160, 300, 2, 99
    w = rng.dirichlet(np.ones(n_comp), size=n_rows)
    mu = np.sort(rng.uniform(-2, 4, (n_rows, n_comp)), axis=1)
    sd = rng.uniform(0.4, 1.6, (n_rows, n_comp))
    u = np.sort(rng.uniform(0.002, 0.998, (n_rows, n_atoms)), axis=1)
    levels = np.broadcast_to(np.arange(1, n_levels + 1) / (n_levels + 1.0),
                             (n_rows, n_levels)).copy()
    t = rng.uniform(-4, 6, (n_rows, n_atoms))
    vals = np.sort(rng.normal(size=2000))
    cw = np.cumsum(rng.dirichlet(np.ones(2000)))
    cw[-1] = 1.0
    qlv = np.arange(1, 100) / 100.0
    xs = np.sort(rng.choice(np.linspace(-2, 2, 64), size=2000))
    ys = rng.normal(size=2000)
    return {
        "mixture_quantiles(atoms)": ("mixture_quantiles_rows", (u, w, mu, sd, 1e-9)),
        "mixture_quantiles(grid)": ("mixture_quantiles_rows", (levels, w, mu, sd, 1e-9)),
        "responsibilities": ("responsibilities_rows", (t, w, mu, sd)),
        "weighted_quantiles": ("weighted_quantiles", (vals, cw, qlv)),
        "best_split_column": ("best_split_column", (xs, ys, 10)),
    }


def best_time(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    workloads = make_workloads(np.random.default_rng(0))
    header = f"{'workload':28s} {'numpy':>10s} {'compiled':>10s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for label, (name, wargs) in workloads.items():
        t_py = best_time(getattr(py_kernels, name), wargs, args.repeat)
        if c_kernels is None:
            print(f"{label:28s} {t_py * 1e3:9.2f}ms {'n/a':>10s} {'':>8s}")
            continue
        t_c = best_time(getattr(c_kernels, name), wargs, args.repeat)
        print(f"{label:28s} {t_py * 1e3:9.2f}ms {t_c * 1e3:9.2f}ms {t_py / t_c:7.1f}x")
    if c_kernels is None:
        print("\ncompiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
