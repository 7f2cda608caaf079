"""Dense LP solver: max c.x subject to A x <= b, x >= 0.

Two-phase tableau simplex with Bland's rule, so pivoting is deterministic and
cycle-free. Every optimal result carries a dual vector that is verified
against the primal before returning; a certificate failure is a solver bug
and raises. The pivot loop itself lives in the kernel backend.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import simplex_pivot

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpTolerances:
    """All solver tolerances in one place.

    feasibility is scaled by (1 + |b|_inf), optimality is relative to the
    objective magnitude, pivot is the absolute threshold for usable pivots.
    """

    feasibility: float = 1e-9
    optimality: float = 1e-7
    pivot: float = 1e-9


DEFAULT_TOL = LpTolerances()


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None
    value: float = 0.0
    dual: np.ndarray | None = None


class CertificateError(RuntimeError):
    """Optimality certificate failed to verify; indicates a solver defect."""


def _set_objective(tableau, basis, c_ext, m, ncols):
    """Rewrite the reduced-cost row for objective c_ext given the basis."""
    obj = tableau[m]
    obj[:] = 0.0
    obj[: len(c_ext)] = c_ext
    cb = c_ext[basis]  # basis never points at the rhs column
    if np.any(cb):
        obj -= cb @ tableau[:m]


def solve_lp(
    c: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    tol: LpTolerances = DEFAULT_TOL,
    verify: bool = True,
) -> LpSolution:
    c = np.asarray(c, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A.ndim != 2:
        A = A.reshape(len(b), -1)
    m, n = A.shape
    if len(c) != n or len(b) != m:
        raise ValueError("inconsistent LP dimensions")

    if m == 0:
        if np.all(c <= tol.optimality):
            return LpSolution(OPTIMAL, x=np.zeros(n), value=0.0, dual=np.zeros(0))
        return LpSolution(UNBOUNDED)

    flipped = b < 0
    n_art = int(flipped.sum())
    ncols = n + m + n_art + 1
    rhs = ncols - 1
    tableau = np.zeros((m + 1, ncols))
    tableau[:m, :n] = A
    tableau[:m, rhs] = b
    basis = np.zeros(m, dtype=np.int64)
    art_col = n + m
    for i in range(m):
        if flipped[i]:
            tableau[i] *= -1.0
            tableau[i, n + i] = -1.0
            tableau[i, art_col] = 1.0
            basis[i] = art_col
            art_col += 1
        else:
            tableau[i, n + i] = 1.0
            basis[i] = n + i

    feas_tol = tol.feasibility * (1.0 + np.abs(b).max(initial=0.0))

    if n_art:
        # phase 1: maximize minus the artificial sum
        c_ext = np.zeros(n + m + n_art)
        c_ext[n + m :] = -1.0
        _set_objective(tableau, basis, c_ext, m, ncols)
        status = simplex_pivot(tableau, basis, tol.pivot, tol.pivot)
        if status != 0:
            raise RuntimeError("phase-1 objective cannot be unbounded")
        if -tableau[m, rhs] < -feas_tol:
            return LpSolution(INFEASIBLE)
        # drive surviving artificials out of the basis where possible
        for i in range(m):
            if basis[i] >= n + m:
                for j in range(n + m):
                    if abs(tableau[i, j]) > tol.pivot:
                        piv = tableau[i, j]
                        tableau[i] /= piv
                        col = tableau[:, j].copy()
                        col[i] = 0.0
                        tableau -= np.outer(col, tableau[i])
                        tableau[:, j] = 0.0
                        tableau[i, j] = 1.0
                        basis[i] = j
                        break
        # retire artificial columns: zero unless still basic in a null row
        for i in range(m):
            tableau[i, rhs] = max(tableau[i, rhs], 0.0)
        for j in range(n + m, n + m + n_art):
            if not np.any(basis == j):
                tableau[:, j] = 0.0

    scale = 1.0 + np.abs(c).max(initial=0.0)
    c_ext = np.zeros(n + m + n_art)
    c_ext[:n] = c
    _set_objective(tableau, basis, c_ext, m, ncols)
    status = simplex_pivot(tableau, basis, tol.optimality * scale, tol.pivot)
    if status == 1:
        return LpSolution(UNBOUNDED)

    x_full = np.zeros(n + m + n_art)
    for i in range(m):
        x_full[basis[i]] = tableau[i, rhs]
    x = np.maximum(x_full[:n], 0.0)
    value = float(c @ x)
    dual = np.maximum(-tableau[m, n : n + m], 0.0)

    if verify:
        _verify_certificate(c, A, b, x, dual, value, tol, feas_tol)
    return LpSolution(OPTIMAL, x=x, value=value, dual=dual)


def _verify_certificate(c, A, b, x, y, value, tol, feas_tol):
    gap_tol = tol.optimality * (1.0 + abs(value))
    slack_tol = tol.optimality * (1.0 + np.abs(c).max(initial=0.0))
    if np.any(A @ x - b > feas_tol * 10.0):
        raise CertificateError("primal point violates a constraint")
    if np.any(y @ A - c < -slack_tol * 10.0):
        raise CertificateError("dual point violates reduced-cost bounds")
    if y @ b < value - gap_tol * 10.0:
        raise CertificateError("weak duality violated")


def feasible(
    A: np.ndarray, b: np.ndarray, tol: LpTolerances = DEFAULT_TOL
) -> tuple[bool, np.ndarray | None]:
    """Phase-1 feasibility test for {x >= 0 : A x <= b}; returns a point."""
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[1] if A.ndim == 2 else 0
    sol = solve_lp(np.zeros(n), A, b, tol=tol, verify=False)
    if sol.status == OPTIMAL:
        return True, sol.x
    return False, None
