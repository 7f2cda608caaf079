"""Time the compiled kernels against their pure-Python twins.

Run:  python benchmarks/bench_kernels.py [--repeat N]

The two backends are also checked for bit-identical outputs on every case;
that equality is what lets the test suite run on either backend.
"""

from __future__ import annotations

import argparse
import importlib
import time

import numpy as np

from crowdalloc._kernels import fallback


def _load_native():
    try:
        return importlib.import_module("crowdalloc._kernels._native")
    except ImportError:
        return None


def _knapsack_case(gen):
    n = 10
    values = gen.uniform(0.5, 10.0, n)
    sizes = gen.integers(1, 8, n).astype(np.int64)
    bounds = gen.integers(0, 5, n).astype(np.int64)
    return values, sizes, bounds, 40


def _simplex_case(gen):
    m, n = 12, 18
    a = gen.uniform(0.0, 2.0, (m, n))
    b = gen.uniform(1.0, 5.0, m)
    c = gen.uniform(0.0, 1.0, n)
    tableau = np.zeros((m + 1, n + m + 1))
    tableau[:m, :n] = a
    tableau[:m, n : n + m] = np.eye(m)
    tableau[:m, -1] = b
    tableau[m, :n] = c
    basis = np.arange(n, n + m, dtype=np.int64)
    return tableau, basis


def _dfs_case(gen):
    n, s = 5, 3
    r = np.where(gen.random((n, s)) < 0.5, gen.uniform(0.1, 0.6, (n, s)), 0.0)
    r[r.sum(axis=1) == 0, 0] = 0.3
    w = gen.uniform(0.5, 3.0, n)
    ub = gen.integers(1, 4, n).astype(np.int64)
    caps = gen.uniform(1.0, 3.0, s)
    return r, w, ub, caps


def _bench(label, fn_fb, fn_nat, cases, repeat):
    t0 = time.perf_counter()
    for _ in range(repeat):
        out_fb = [fn_fb(*case) for case in cases]
    t_fb = (time.perf_counter() - t0) / repeat
    if fn_nat is None:
        print(f"{label:18s} fallback {t_fb * 1e3:8.2f} ms   native: unavailable")
        return
    t0 = time.perf_counter()
    for _ in range(repeat):
        out_nat = [fn_nat(*case) for case in cases]
    t_nat = (time.perf_counter() - t0) / repeat
    for a, b in zip(out_fb, out_nat):
        av = a[0] if isinstance(a, tuple) else a
        bv = b[0] if isinstance(b, tuple) else b
        assert repr(av) == repr(bv), f"{label}: backend mismatch"
        if isinstance(a, tuple):
            assert np.array_equal(np.asarray(a[1]), np.asarray(b[1]))
    speed = t_fb / t_nat if t_nat > 0 else float("inf")
    print(
        f"{label:18s} fallback {t_fb * 1e3:8.2f} ms   native {t_nat * 1e3:8.2f} ms"
        f"   speedup x{speed:.1f}"
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--cases", type=int, default=200)
    args = parser.parse_args()

    native = _load_native()
    gen = np.random.default_rng(7)

    knap = [_knapsack_case(gen) for _ in range(args.cases)]
    _bench(
        "bounded_knapsack",
        fallback.bounded_knapsack,
        native.bounded_knapsack if native else None,
        knap,
        args.repeat,
    )

    simplex = [_simplex_case(gen) for _ in range(args.cases)]

    def run_fb(tableau, basis):
        t = tableau.copy()
        b = basis.copy()
        return fallback.simplex_pivot(t, b, 1e-9, 1e-9), t[-1, -1]

    def run_nat(tableau, basis):
        t = tableau.copy()
        b = basis.copy()
        return native.simplex_pivot(t, b, 1e-9, 1e-9), t[-1, -1]

    _bench(
        "simplex_pivot",
        run_fb,
        run_nat if native else None,
        simplex,
        args.repeat,
    )

    dfs = [_dfs_case(gen) for _ in range(args.cases)]

    def dfs_fb(r, w, ub, caps):
        return fallback.exact_dfs(r, w, ub, caps, None, 0, 1e-9)

    def dfs_nat(r, w, ub, caps):
        return native.exact_dfs(r, w, ub, caps, None, 0, 1e-9)

    _bench("exact_dfs", dfs_fb, dfs_nat if native else None, dfs, args.repeat)


if __name__ == "__main__":
    main()
