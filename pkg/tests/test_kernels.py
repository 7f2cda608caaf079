"""Kernel oracles: knapsack and count-DFS against brute force, plus
backend parity when the compiled extension is importable."""

from __future__ import annotations

import importlib
from itertools import product

import numpy as np
import pytest

from crowdalloc._kernels import fallback

try:
    native = importlib.import_module("crowdalloc._kernels._native")
except ImportError:
    native = None

BACKENDS = [fallback] if native is None else [fallback, native]


def brute_knapsack(values, sizes, bounds, capacity):
    best_v, best_c = 0.0, tuple(0 for _ in values)
    for combo in product(*(range(b + 1) for b in bounds)):
        size = sum(z * s for z, s in zip(combo, sizes))
        if size > capacity:
            continue
        val = sum(z * v for z, v in zip(combo, values))
        if val > best_v + 1e-12:
            best_v, best_c = val, combo
    return best_v, best_c


@pytest.mark.parametrize("kern", BACKENDS, ids=lambda k: k.__name__.rsplit(".", 1)[-1])
def test_knapsack_frozen(kern):
    # one of each item fills the capacity exactly and beats two of the second
    value, counts = kern.bounded_knapsack(
        np.array([6.0, 5.0]), np.array([4, 3], dtype=np.int64), np.array([1, 2], dtype=np.int64), 7
    )
    assert value == 11.0
    assert counts.tolist() == [1, 1]


@pytest.mark.parametrize("kern", BACKENDS, ids=lambda k: k.__name__.rsplit(".", 1)[-1])
def test_knapsack_empty_and_zero_capacity(kern):
    value, counts = kern.bounded_knapsack(
        np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), 5
    )
    assert value == 0.0 and counts.size == 0
    value, counts = kern.bounded_knapsack(
        np.array([3.0]), np.array([2], dtype=np.int64), np.array([4], dtype=np.int64), 0
    )
    assert value == 0.0 and counts.tolist() == [0]


def test_knapsack_prefers_fewer_units_on_value_ties():
    # two ways to reach value 6; the DP backtracks the smallest count per item
    value, counts = fallback.bounded_knapsack(
        np.array([6.0, 3.0]), np.array([4, 2], dtype=np.int64), np.array([1, 2], dtype=np.int64), 4
    )
    assert value == 6.0
    assert counts.tolist() == [1, 0]


def test_knapsack_fuzz_matches_brute_force():
    gen = np.random.default_rng(20240817)
    for _ in range(300):
        n = int(gen.integers(1, 7))
        values = gen.uniform(0.0, 9.0, n).round(3)
        sizes = gen.integers(1, 11, n).astype(np.int64)
        bounds = gen.integers(0, 4, n).astype(np.int64)
        capacity = int(gen.integers(0, 28))
        got_v, got_c = fallback.bounded_knapsack(values, sizes, bounds, capacity)
        want_v, _ = brute_knapsack(values.tolist(), sizes.tolist(), bounds.tolist(), capacity)
        assert got_v == pytest.approx(want_v, abs=1e-9)
        assert np.all(got_c <= bounds)
        assert int(got_c @ sizes) <= capacity
        assert float(got_c @ values) == pytest.approx(got_v, abs=1e-9)


def brute_dfs(r, w, ub, caps, pools, ff, tol):
    best_v, best_c = -1.0, None
    for combo in product(*(range(int(b) + 1) for b in ub)):
        dem = np.asarray(combo, dtype=np.float64) @ r
        if ff:
            nskills = r.shape[1]
            ok = True
            for t in range(1, 1 << nskills):
                tot = sum(dem[s] for s in range(nskills) if t & (1 << s))
                if tot > pools[t] + tol:
                    ok = False
                    break
        else:
            ok = bool(np.all(dem <= caps + tol))
        if not ok:
            continue
        val = float(np.asarray(combo) @ w)
        if val > best_v + 1e-12:
            best_v, best_c = val, combo
    return best_v, best_c


@pytest.mark.parametrize("kern", BACKENDS, ids=lambda k: k.__name__.rsplit(".", 1)[-1])
def test_exact_dfs_frozen_caps(kern):
    # two independent skills, only the first step carries weight
    r = np.array([[0.5, 0.0], [0.0, 0.5]])
    value, counts = kern.exact_dfs(
        r, np.array([2.0, 0.0]), np.array([3, 3], dtype=np.int64),
        np.array([1.0, 1.0]), None, 0, 1e-9,
    )
    assert value == 4.0
    assert counts.tolist() == [2, 0]


def test_exact_dfs_first_optimum_breaks_ties():
    # both steps have the same weight and share the skill budget: the search
    # scans lexicographically and keeps the first maximum it sees
    r = np.array([[0.5], [0.5]])
    value, counts = fallback.exact_dfs(
        r, np.array([1.0, 1.0]), np.array([2, 2], dtype=np.int64),
        np.array([1.0]), None, 0, 1e-9,
    )
    assert value == 2.0
    assert counts.tolist() == [0, 2]


def test_exact_dfs_fuzz_caps_mode():
    gen = np.random.default_rng(7)
    for _ in range(200):
        n = int(gen.integers(1, 4))
        s = int(gen.integers(1, 3))
        r = gen.uniform(0.0, 1.0, (n, s)).round(2)
        r[gen.uniform(size=(n, s)) < 0.3] = 0.0
        w = gen.uniform(0.0, 3.0, n).round(2)
        ub = gen.integers(0, 4, n).astype(np.int64)
        caps = gen.uniform(0.2, 2.5, s).round(2)
        got_v, got_c = fallback.exact_dfs(r, w, ub, caps, None, 0, 1e-9)
        want_v, _ = brute_dfs(r, w, ub, caps, None, 0, 1e-9)
        assert got_v == pytest.approx(want_v, abs=1e-9)
        dem = got_c @ r
        assert np.all(dem <= caps + 1e-9)


def test_exact_dfs_fuzz_subset_mode():
    gen = np.random.default_rng(8)
    for _ in range(200):
        n = int(gen.integers(1, 4))
        s = int(gen.integers(1, 3))
        r = gen.uniform(0.0, 1.0, (n, s)).round(2)
        w = gen.uniform(0.0, 3.0, n).round(2)
        ub = gen.integers(0, 4, n).astype(np.int64)
        pools = np.zeros(1 << s)
        for t in range(1, 1 << s):
            pools[t] = gen.uniform(0.2, 3.0)
        # Hall right-hand sides must be monotone over subsets to mean anything
        for t in range(1, 1 << s):
            for b in range(s):
                if t & (1 << b):
                    pools[t] = max(pools[t], pools[t & ~(1 << b)])
        got_v, _ = fallback.exact_dfs(r, w, ub, np.zeros(s), pools, 1, 1e-9)
        want_v, _ = brute_dfs(r, w, ub, None, pools, 1, 1e-9)
        assert got_v == pytest.approx(want_v, abs=1e-9)


@pytest.mark.skipif(native is None, reason="compiled kernels not built")
def test_backends_agree_bit_for_bit():
    gen = np.random.default_rng(99)
    for _ in range(150):
        n = int(gen.integers(1, 6))
        values = gen.uniform(0.0, 9.0, n).round(3)
        sizes = gen.integers(1, 9, n).astype(np.int64)
        bounds = gen.integers(0, 4, n).astype(np.int64)
        capacity = int(gen.integers(0, 25))
        fv, fc = fallback.bounded_knapsack(values, sizes, bounds, capacity)
        nv, nc = native.bounded_knapsack(values, sizes, bounds, capacity)
        assert repr(fv) == repr(nv)
        assert np.array_equal(fc, nc)

        s = int(gen.integers(1, 3))
        r = gen.uniform(0.0, 1.0, (n, s)).round(2)
        w = gen.uniform(0.0, 3.0, n).round(2)
        ub = gen.integers(0, 3, n).astype(np.int64)
        caps = gen.uniform(0.2, 2.5, s).round(2)
        fres = fallback.exact_dfs(r, w, ub, caps, None, 0, 1e-9)
        nres = native.exact_dfs(r, w, ub, caps, None, 0, 1e-9)
        assert repr(fres[0]) == repr(nres[0])
        assert np.array_equal(fres[1], nres[1])
