"""Pure-Python kernels, used when the compiled extension is unavailable.

Every function here mirrors its compiled twin operation for operation so both
backends produce bit-identical results (the extension is built with float
contraction disabled for the same reason).
"""

from __future__ import annotations

import numpy as np


def bounded_knapsack(values, sizes, bounds, capacity):
    """Exact bounded knapsack over integer capacity.

    values: float64 (n,), nonnegative. sizes: int64 (n,), >= 1.
    bounds: int64 (n,), >= 0. Returns (best_value, counts int64 (n,)).
    Ties prefer counts on lower item indices.
    """
    n = len(values)
    counts = np.zeros(n, dtype=np.int64)
    if n == 0 or capacity <= 0:
        return 0.0, counts
    cap = int(capacity)
    # f[i] = best value over items < i per residual capacity
    f = np.zeros((n + 1, cap + 1), dtype=np.float64)
    for i in range(n):
        prev = f[i]
        cur = f[i + 1]
        cur[:] = prev
        v = float(values[i])
        s = int(sizes[i])
        b = min(int(bounds[i]), cap // s)
        for z in range(1, b + 1):
            cost = z * s
            cand = prev[: cap + 1 - cost] + z * v
            np.maximum(cur[cost:], cand, out=cur[cost:])
    c = cap
    for i in range(n - 1, -1, -1):
        target = f[i + 1][c]
        v = float(values[i])
        s = int(sizes[i])
        b = min(int(bounds[i]), c // s)
        for z in range(b + 1):
            if f[i][c - z * s] + z * v == target:
                counts[i] = z
                c -= z * s
                break
    return float(f[n][cap]), counts


def simplex_pivot(tableau, basis, enter_tol, pivot_tol):
    """Run Bland-rule pivots in place until optimal or unbounded.

    tableau: float64 (m+1, ncols); last row is the reduced-cost row for a
    maximization, last column the rhs. basis: int64 (m,). Returns 0 when no
    reduced cost exceeds enter_tol (optimal), 1 on an unbounded direction.
    """
    m = tableau.shape[0] - 1
    ncols = tableau.shape[1]
    rhs = ncols - 1
    obj = tableau[m]
    while True:
        enter = -1
        for j in range(rhs):
            if obj[j] > enter_tol:
                enter = j
                break
        if enter < 0:
            return 0
        leave = -1
        best = 0.0
        for i in range(m):
            a = tableau[i, enter]
            if a > pivot_tol:
                ratio = tableau[i, rhs] / a
                if (
                    leave < 0
                    or ratio < best
                    or (ratio == best and basis[i] < basis[leave])
                ):
                    leave = i
                    best = ratio
        if leave < 0:
            return 1
        piv = tableau[leave, enter]
        tableau[leave] /= piv
        col = tableau[:, enter].copy()
        col[leave] = 0.0
        tableau -= np.outer(col, tableau[leave])
        tableau[:, enter] = 0.0
        tableau[leave, enter] = 1.0
        basis[leave] = enter


def exact_dfs(r, w, ub, caps, pools, ff, tol):
    """Enumerate count vectors maximizing sum(w * z) subject to feasibility.

    r: float64 (n, S) per-skill hours, w: float64 (n,) > 0, ub: int64 (n,).
    ff == 0: demand per skill must stay within caps (float64 (S,)).
    ff == 1: for every nonempty skill subset T, demand(T) must stay within
    pools[bitmask(T)] (float64 (2^S,)).
    Returns (best_value, counts). First optimum in ascending lexicographic
    order of the count vector wins ties.
    """
    n, S = r.shape
    best_val = 0.0
    best = np.zeros(n, dtype=np.int64)
    if n == 0:
        return best_val, best
    suffix = np.zeros(n + 1, dtype=np.float64)
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] + w[i] * ub[i]
    nsub = 1 << S
    dem = np.zeros(S, dtype=np.float64)
    cur = np.zeros(n, dtype=np.int64)

    def feasible():
        if ff == 0:
            for s in range(S):
                if dem[s] > caps[s] + tol:
                    return False
            return True
        for t in range(1, nsub):
            tot = 0.0
            for s in range(S):
                if t & (1 << s):
                    tot += dem[s]
            if tot > pools[t] + tol:
                return False
        return True

    def rec(i, val):
        nonlocal best_val
        if val > best_val:
            best_val = val
            best[:] = cur
        if i == n or val + suffix[i] <= best_val:
            return
        rec(i + 1, val)
        saved = dem.copy()
        for z in range(1, int(ub[i]) + 1):
            for s in range(S):
                dem[s] += r[i, s]
            if not feasible():
                break
            cur[i] = z
            rec(i + 1, val + z * w[i])
        cur[i] = 0
        dem[:] = saved

    rec(0, 0.0)
    return float(best_val), best
