"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--sizes 50,200,1000]

Each kernel runs once before timing so numba compilation is excluded. Both
variants are checked to agree before their timings are reported.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from drcc import kernels
from drcc._accel import HAS_NUMBA


def _cases(n: int, rng):
    xi = np.sort(rng.uniform(0.0, 100.0, n))[::-1].copy()
    eps = 0.05 * float(xi.std() + 1.0)
    alphas = np.linspace(0.01, 0.5, 64)
    d = rng.uniform(0.0, 5.0, n)
    order = np.argsort(-rng.uniform(size=n), kind="stable").astype(np.int64)
    tab = rng.normal(size=(min(n, 300), 2 * min(n, 300)))

    def var_c(fn):
        oc, od, oj = np.empty(64), np.empty(64), np.empty(64, dtype=np.int64)
        fn(xi, eps, alphas, oc, od, oj)
        return oc

    def levels(fn):
        out = np.empty(n)
        fn(xi, eps, 1e-10, out)
        return out

    def greedy(fn):
        out = np.empty(n)
        fn(3.0, d, order, out)
        return out

    def pivot(fn):
        t = tab.copy()
        fn(t, 0, 1)
        return t

    return {
        "water": (lambda fn: fn(xi, float(xi[n // 3]), 0.3), kernels.water_nb, kernels.water_np),
        "var_continuous": (var_c, kernels.var_continuous_nb, kernels.var_continuous_np),
        "alpha_levels": (levels, kernels.alpha_levels_nb, kernels.alpha_levels_np),
        "greedy_pi": (greedy, kernels.greedy_pi_nb, kernels.greedy_pi_np),
        "pivot": (pivot, kernels.pivot_nb, kernels.pivot_np),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", default="50,200,1000")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"numba available: {HAS_NUMBA}")
    print(f"{'kernel':<16}{'N':>6}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>9}")
    for n in (int(s) for s in args.sizes.split(",")):
        for name, (run, fast, slow) in _cases(n, rng).items():
            a, b = np.asarray(run(fast)), np.asarray(run(slow))
            if not np.allclose(a, b, rtol=1e-9, atol=1e-9, equal_nan=True):
                raise SystemExit(f"{name}: numba and numpy results differ at N={n}")
            number = 20
            tf = min(timeit.repeat(lambda: run(fast), number=number, repeat=args.repeat)) / number
            ts = min(timeit.repeat(lambda: run(slow), number=number, repeat=args.repeat)) / number
            print(f"{name:<16}{n:>6}{tf * 1e3:>12.4f}{ts * 1e3:>12.4f}{ts / tf:>9.1f}")


if __name__ == "__main__":
    main()
