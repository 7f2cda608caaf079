# Compiled kernels. Each function mirrors fallback.py operation for
# operation; the build disables float contraction so results are
# bit-identical across the two backends.

import numpy as np

cimport numpy as cnp

cnp.import_array()


def bounded_knapsack(values, sizes, bounds, capacity):
    cdef double[:] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef long long[:] sz = np.ascontiguousarray(sizes, dtype=np.int64)
    cdef long long[:] bd = np.ascontiguousarray(bounds, dtype=np.int64)
    cdef Py_ssize_t n = v.shape[0]
    cdef long long cap = capacity
    counts_arr = np.zeros(n, dtype=np.int64)
    cdef long long[:] counts = counts_arr
    if n == 0 or cap <= 0:
        return 0.0, counts_arr
    f_arr = np.zeros((n + 1, cap + 1), dtype=np.float64)
    cdef double[:, :] f = f_arr
    cdef Py_ssize_t i
    cdef long long z, b, cost, c, s
    cdef double vi, cand, target
    for i in range(n):
        for c in range(cap + 1):
            f[i + 1, c] = f[i, c]
        vi = v[i]
        s = sz[i]
        b = bd[i]
        if cap // s < b:
            b = cap // s
        for z in range(1, b + 1):
            cost = z * s
            for c in range(cost, cap + 1):
                cand = f[i, c - cost] + z * vi
                if cand > f[i + 1, c]:
                    f[i + 1, c] = cand
    c = cap
    for i in range(n - 1, -1, -1):
        target = f[i + 1, c]
        vi = v[i]
        s = sz[i]
        b = bd[i]
        if c // s < b:
            b = c // s
        for z in range(b + 1):
            if f[i, c - z * s] + z * vi == target:
                counts[i] = z
                c -= z * s
                break
    return float(f[n, cap]), counts_arr


def simplex_pivot(tableau, basis, double enter_tol, double pivot_tol):
    cdef double[:, :] t = tableau
    cdef long long[:] bs = basis
    cdef Py_ssize_t m = t.shape[0] - 1
    cdef Py_ssize_t ncols = t.shape[1]
    cdef Py_ssize_t rhs = ncols - 1
    cdef Py_ssize_t i, j, enter, leave
    cdef double a, ratio, best, piv, factor
    while True:
        enter = -1
        for j in range(rhs):
            if t[m, j] > enter_tol:
                enter = j
                break
        if enter < 0:
            return 0
        leave = -1
        best = 0.0
        for i in range(m):
            a = t[i, enter]
            if a > pivot_tol:
                ratio = t[i, rhs] / a
                if leave < 0 or ratio < best or (ratio == best and bs[i] < bs[leave]):
                    leave = i
                    best = ratio
        if leave < 0:
            return 1
        piv = t[leave, enter]
        for j in range(ncols):
            t[leave, j] /= piv
        for i in range(m + 1):
            if i == leave:
                continue
            factor = t[i, enter]
            if factor != 0.0:
                for j in range(ncols):
                    t[i, j] -= factor * t[leave, j]
        for i in range(m + 1):
            t[i, enter] = 0.0
        t[leave, enter] = 1.0
        bs[leave] = enter


cdef struct DfsCtx:
    Py_ssize_t n
    Py_ssize_t S
    int ff
    int nsub
    double tol
    double best_val


cdef bint _feasible(DfsCtx* ctx, double* dem, double* caps, double* pools) noexcept:
    cdef Py_ssize_t s
    cdef int t
    cdef double tot
    if ctx.ff == 0:
        for s in range(ctx.S):
            if dem[s] > caps[s] + ctx.tol:
                return False
        return True
    for t in range(1, ctx.nsub):
        tot = 0.0
        for s in range(ctx.S):
            if t & (1 << s):
                tot += dem[s]
        if tot > pools[t] + ctx.tol:
            return False
    return True


cdef void _rec(DfsCtx* ctx, Py_ssize_t i, double val,
               double[:, :] r, double[:] w, long long[:] ub, double[:] suffix,
               double* dem, double* saved, double* caps, double* pools,
               long long[:] cur, long long[:] best) noexcept:
    cdef Py_ssize_t k, s
    cdef long long z
    if val > ctx.best_val:
        ctx.best_val = val
        for k in range(ctx.n):
            best[k] = cur[k]
    if i == ctx.n or val + suffix[i] <= ctx.best_val:
        return
    _rec(ctx, i + 1, val, r, w, ub, suffix, dem, saved, caps, pools, cur, best)
    cdef Py_ssize_t off = i * ctx.S
    for s in range(ctx.S):
        saved[off + s] = dem[s]
    for z in range(1, ub[i] + 1):
        for s in range(ctx.S):
            dem[s] += r[i, s]
        if not _feasible(ctx, dem, caps, pools):
            break
        cur[i] = z
        _rec(ctx, i + 1, val + z * w[i], r, w, ub, suffix, dem, saved, caps,
             pools, cur, best)
    cur[i] = 0
    for s in range(ctx.S):
        dem[s] = saved[off + s]


def exact_dfs(r, w, ub, caps, pools, int ff, double tol):
    cdef double[:, :] rv = np.ascontiguousarray(r, dtype=np.float64)
    cdef double[:] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef long long[:] ubv = np.ascontiguousarray(ub, dtype=np.int64)
    cdef Py_ssize_t n = rv.shape[0]
    cdef Py_ssize_t S = rv.shape[1]
    best_arr = np.zeros(n, dtype=np.int64)
    if n == 0:
        return 0.0, best_arr
    caps_arr = np.ascontiguousarray(caps, dtype=np.float64)
    if pools is None:
        pools_arr = np.zeros(1, dtype=np.float64)
    else:
        pools_arr = np.ascontiguousarray(pools, dtype=np.float64)
    cdef double[:] capsv = caps_arr
    cdef double[:] poolsv = pools_arr
    suffix_arr = np.zeros(n + 1, dtype=np.float64)
    cdef double[:] suffix = suffix_arr
    cdef Py_ssize_t i
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] + wv[i] * ubv[i]
    dem_arr = np.zeros(S, dtype=np.float64)
    saved_arr = np.zeros(n * S, dtype=np.float64)
    cur_arr = np.zeros(n, dtype=np.int64)
    cdef double[:] dem = dem_arr
    cdef double[:] saved = saved_arr
    cdef long long[:] cur = cur_arr
    cdef long long[:] best = best_arr
    cdef DfsCtx ctx
    ctx.n = n
    ctx.S = S
    ctx.ff = ff
    ctx.nsub = 1 << S
    ctx.tol = tol
    ctx.best_val = 0.0
    _rec(&ctx, 0, 0.0, rv, wv, ubv, suffix, &dem[0], &saved[0], &capsv[0],
         &poolsv[0], cur, best)
    return float(ctx.best_val), best_arr
