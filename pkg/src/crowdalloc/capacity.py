"""Capacity region oracle for desk-scale instances.

The per-draw allocation set C(u) collects integer step-count vectors a
servable by u agents in one epoch, ignoring queues and precedence. The
stability region is the set of arrival-rate vectors dominated by a mixture,
over the availability distribution, of convex combinations of C(u) points.
Everything here is exact but exponential, guarded by enumeration caps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, IntractableInstance
from .linprog import OPTIMAL, UNBOUNDED, feasible, solve_lp
from .model import ValidatedSystem
from .processes import GammaTable

FEAS_TOL = 1e-9
MEMBER_TOL = 1e-6


# -- count-space feasibility ------------------------------------------------


def skill_caps(sys: ValidatedSystem, u: np.ndarray) -> np.ndarray:
    """Per-skill pooled hours when agent budgets are skill-bound."""
    caps = np.zeros(sys.num_skills)
    for m, spec in enumerate(sys.agent_types):
        if u[m]:
            caps += float(u[m]) * np.asarray(spec.inflexible_hours)
    return caps


def subset_pools(sys: ValidatedSystem, u: np.ndarray) -> np.ndarray:
    """pools[T] = total fungible hours of agents holding any skill in T.

    A demand vector is coverable by flexible agents iff demand(T) <= pools[T]
    for every nonempty skill subset T (Hall's condition for the bipartite
    transportation problem).
    """
    if sys.num_skills > 16:
        raise IntractableInstance("subset pools need <= 16 skills")
    nsub = 1 << sys.num_skills
    pools = np.zeros(nsub)
    for m, spec in enumerate(sys.agent_types):
        if not u[m]:
            continue
        mask = 0
        for s in spec.skills:
            mask |= 1 << s
        hours = float(u[m]) * spec.flexible_hours
        for t in range(1, nsub):
            if t & mask:
                pools[t] += hours
    return pools


def demand_feasible(dem: np.ndarray, caps: np.ndarray | None, pools: np.ndarray | None) -> bool:
    if pools is None:
        return bool(np.all(dem <= caps + FEAS_TOL))
    nsub = len(pools)
    nskills = nsub.bit_length() - 1
    for t in range(1, nsub):
        tot = 0.0
        for s in range(nskills):
            if t & (1 << s):
                tot += dem[s]
        if tot > pools[t] + FEAS_TOL:
            return False
    return True


def packing_feasible(sys: ValidatedSystem, u: np.ndarray, counts: np.ndarray) -> bool:
    """Exact single-agent-per-step packability (inflexible steps).

    Steps are placed largest-first by total size onto agent instances via
    depth-first search with identical-agent symmetry breaking.
    """
    units = []
    for idx in range(sys.num_steps):
        for _ in range(int(counts[idx])):
            units.append(idx)
    if not units:
        return True
    units.sort(key=lambda i: (-sys.step_total[i], i))
    flex = sys.regime.agents_flexible
    budgets: list = []
    types: list[int] = []
    for m, spec in enumerate(sys.agent_types):
        for _ in range(int(u[m])):
            types.append(m)
            budgets.append(spec.flexible_hours if flex else np.array(spec.inflexible_hours))
    n_agents = len(budgets)

    def fits(a: int, idx: int) -> bool:
        if not sys.step_skills[idx] <= sys.agent_types[types[a]].skills:
            return False
        if flex:
            return budgets[a] + FEAS_TOL >= sys.step_total[idx]
        return bool(np.all(budgets[a] + FEAS_TOL >= sys.r_matrix[idx]))

    def place(a: int, idx: int, sign: float) -> None:
        if flex:
            budgets[a] -= sign * sys.step_total[idx]
        else:
            budgets[a] -= sign * sys.r_matrix[idx]

    def rec(i: int) -> bool:
        if i == len(units):
            return True
        idx = units[i]
        seen: set = set()
        for a in range(n_agents):
            key = (types[a], budgets[a] if flex else budgets[a].tobytes())
            if key in seen:
                continue
            seen.add(key)
            if not fits(a, idx):
                continue
            place(a, idx, 1.0)
            if rec(i + 1):
                return True
            place(a, idx, -1.0)
        return False

    return rec(0)


def counts_feasible(sys: ValidatedSystem, u: np.ndarray, counts: np.ndarray) -> bool:
    """Is the step-count vector servable by u agents in one epoch?"""
    if sys.regime.steps_flexible:
        dem = counts @ sys.r_matrix
        if sys.regime.agents_flexible:
            return demand_feasible(dem, None, subset_pools(sys, u))
        return demand_feasible(dem, skill_caps(sys, u), None)
    return packing_feasible(sys, u, counts)


def count_upper_bounds(sys: ValidatedSystem, u: np.ndarray) -> np.ndarray:
    """Per-type count bound treating each type alone (box bound for search)."""
    ub = np.zeros(sys.num_steps, dtype=np.int64)
    flex_agents = sys.regime.agents_flexible
    if sys.regime.steps_flexible:
        caps = None if flex_agents else skill_caps(sys, u)
        pools = subset_pools(sys, u) if flex_agents else None
        for idx in range(sys.num_steps):
            bound = np.inf
            for s in sys.step_skills[idx]:
                supply = pools[1 << s] if flex_agents else caps[s]
                bound = min(bound, (supply + FEAS_TOL) / sys.r_matrix[idx, s])
            ub[idx] = int(bound) if np.isfinite(bound) else 0
        return ub
    for idx in range(sys.num_steps):
        total = 0
        for m, spec in enumerate(sys.agent_types):
            if not sys.step_skills[idx] <= spec.skills or not u[m]:
                continue
            if flex_agents:
                per = int((spec.flexible_hours + FEAS_TOL) / sys.step_total[idx])
            else:
                per = min(
                    int((spec.inflexible_hours[s] + FEAS_TOL) / sys.r_matrix[idx, s])
                    for s in sys.step_skills[idx]
                )
            total += int(u[m]) * per
        ub[idx] = total
    return ub


# -- allocation set ----------------------------------------------------------


def enumerate_allocations(
    sys: ValidatedSystem, u: np.ndarray, cap: int = 10**6
) -> np.ndarray:
    """Maximal elements of C(u), one row per vector.

    The feasible set is coordinate-convex, so the search walks count vectors
    depth-first, aborting each axis on the first infeasible value, and a
    feasible vector is maximal iff no single increment stays feasible.
    """
    u = np.asarray(u, dtype=np.int64)
    ub = count_upper_bounds(sys, u)
    n = sys.num_steps
    feasible_set: set[tuple[int, ...]] = set()
    cur = np.zeros(n, dtype=np.int64)
    nodes = 0

    def rec(i: int) -> None:
        nonlocal nodes
        nodes += 1
        if nodes > cap:
            raise IntractableInstance(f"allocation set enumeration exceeded {cap} nodes")
        feasible_set.add(tuple(int(x) for x in cur))
        if i == n:
            return
        rec(i + 1)
        for z in range(1, int(ub[i]) + 1):
            cur[i] = z
            if not counts_feasible(sys, u, cur):
                break
            rec(i + 1)
        cur[i] = 0

    if not counts_feasible(sys, u, cur):
        raise ConfigError("the zero allocation must always be feasible")
    rec(0)

    # a point is maximal iff no single increment stays feasible; the set is
    # complete inside the box and ub is a hard per-type bound, so a lookup
    # settles each increment
    maximal = []
    for pt in feasible_set:
        bumped = (
            pt[:i] + (pt[i] + 1,) + pt[i + 1 :] for i in range(n) if pt[i] < ub[i]
        )
        if not any(b in feasible_set for b in bumped):
            maximal.append(pt)
    return np.array(sorted(maximal), dtype=np.int64).reshape(len(maximal), n)


# -- region membership -------------------------------------------------------


@dataclass
class MembershipReport:
    verdict: str  # "inside" | "outside" | "boundary"
    margin: float  # max rho with rho * lambda coverable, minus 1 (inf when free)
    mixture: dict | None = None  # per-draw vertex weights when inside/boundary
    separator: np.ndarray | None = None  # step-space prices when outside


def expand_to_steps(sys: ValidatedSystem, lam: np.ndarray) -> np.ndarray:
    """Per-task rates replicated onto every step of the task."""
    lam = np.asarray(lam, dtype=np.float64)
    if lam.shape != (len(sys.task_types),):
        raise ConfigError(f"rate vector must have length {len(sys.task_types)}")
    if np.any(lam < 0):
        raise ConfigError("rates must be nonnegative")
    out = np.zeros(sys.num_steps)
    for idx, (j, _k) in enumerate(sys.step_pairs):
        out[idx] = lam[j]
    return out


def capacity_member(
    sys: ValidatedSystem,
    gamma: GammaTable,
    lam: np.ndarray,
    tol: float = MEMBER_TOL,
    cap: int = 10**6,
) -> MembershipReport:
    """Decide whether per-task rates lam lie in the stability region.

    Solves max rho s.t. rho * lam_steps is dominated by a Gamma-mixture of
    convex combinations of allocation-set vertices. rho > 1 + tol is inside,
    rho < 1 - tol outside, otherwise boundary.
    """
    lam_steps = expand_to_steps(sys, lam)
    verts = [enumerate_allocations(sys, np.array(pt), cap=cap) for pt in gamma.points]

    nv = [len(v) for v in verts]
    n_theta = sum(nv)
    n = sys.num_steps
    nvar = n_theta + 1  # thetas then rho
    rows = []
    rhs = []
    # per draw: sum of its thetas == 1, as two inequalities
    off = 0
    for v in nv:
        row = np.zeros(nvar)
        row[off : off + v] = 1.0
        rows.append(row)
        rhs.append(1.0)
        rows.append(-row)
        rhs.append(-1.0)
        off += v
    # per step: rho * lam - sum_u gamma_u sum_v theta a <= 0
    for i in range(n):
        if lam_steps[i] == 0.0:
            continue
        row = np.zeros(nvar)
        row[n_theta] = lam_steps[i]
        off = 0
        for (prob, vv) in zip(gamma.probs, verts):
            row[off : off + len(vv)] = -prob * vv[:, i]
            off += len(vv)
        rows.append(row)
        rhs.append(0.0)
    c = np.zeros(nvar)
    c[n_theta] = 1.0

    if not np.any(lam_steps > 0):
        return MembershipReport(verdict="inside", margin=np.inf)

    sol = solve_lp(c, np.array(rows), np.array(rhs))
    if sol.status == UNBOUNDED:
        return MembershipReport(verdict="inside", margin=np.inf)
    if sol.status != OPTIMAL:
        raise RuntimeError(f"membership LP ended {sol.status}")
    rho = sol.value
    margin = rho - 1.0

    if margin > tol:
        verdict = "inside"
    elif margin < -tol:
        verdict = "outside"
    else:
        verdict = "boundary"

    report = MembershipReport(verdict=verdict, margin=margin)
    if verdict == "outside":
        # dual prices of the step rows separate lam from the region
        sep = np.zeros(n)
        row_idx = 2 * len(nv)
        for i in range(n):
            if lam_steps[i] == 0.0:
                continue
            sep[i] = sol.dual[row_idx]
            row_idx += 1
        report.separator = sep
    else:
        mixture = {}
        off = 0
        for (pt, vv) in zip(gamma.points, verts):
            weights = sol.x[off : off + len(vv)]
            mixture[pt] = [
                (tuple(int(x) for x in vv[k]), float(weights[k]))
                for k in range(len(vv))
                if weights[k] > 1e-12
            ]
            off += len(vv)
        report.mixture = mixture
        # verify the certificate: mixture must dominate rho * lam
        achieved = np.zeros(n)
        off = 0
        for (prob, vv) in zip(gamma.probs, verts):
            achieved += prob * (sol.x[off : off + len(vv)] @ vv)
            off += len(vv)
        scale = 1.0 + float(np.max(lam_steps))
        if np.any(achieved + 1e-7 * scale < rho * lam_steps):
            raise RuntimeError("membership certificate failed to dominate the target")
    return report


def boundary_scalar(
    sys: ValidatedSystem,
    gamma: GammaTable,
    ray: np.ndarray,
    tol: float = 1e-6,
    cap: int = 10**6,
) -> float:
    """Largest x with x * ray inside the region, bisected to tol."""
    ray = np.asarray(ray, dtype=np.float64)
    if not np.any(ray > 0):
        raise ConfigError("ray must have a positive component")

    inner_tol = min(1e-9, tol / 100.0)

    def verdict(x: float) -> str:
        return capacity_member(sys, gamma, x * ray, tol=inner_tol, cap=cap).verdict

    hi = 1.0
    for _ in range(100):
        if verdict(hi) == "outside":
            break
        hi *= 2.0
    else:
        raise IntractableInstance("no outside point found along the ray")
    lo = 0.0
    while hi - lo > tol / 4.0:
        mid = 0.5 * (lo + hi)
        if verdict(mid) == "outside":
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# -- closed-form outer bounds -------------------------------------------------


@dataclass
class OuterBoundReport:
    passed: bool
    details: list  # (label, load, bound) triples


def outer_bound_check(
    sys: ValidatedSystem, lam: np.ndarray, mu: np.ndarray
) -> OuterBoundReport:
    """Necessary stability conditions from mean supply, by regime.

    mu holds mean available agents per type. Inflexible agents: per-skill
    load vs pooled budget. Flexible agents with splittable steps: existence
    of per-type budget fractions covering every skill load. Flexible agents
    with whole steps: requires identical-or-disjoint agent skill sets, each
    step's skills within one class and one common step size; then classwise
    load vs whole-steps-per-agent throughput.
    """
    lam_steps = expand_to_steps(sys, lam)
    mu = np.asarray(mu, dtype=np.float64)
    load = lam_steps @ sys.r_matrix  # per skill
    details = []

    if not sys.regime.agents_flexible:
        caps = np.zeros(sys.num_skills)
        for m, spec in enumerate(sys.agent_types):
            caps += mu[m] * np.asarray(spec.inflexible_hours)
        ok = True
        for s in range(sys.num_skills):
            details.append((f"skill {s}", float(load[s]), float(caps[s])))
            if load[s] > caps[s] + FEAS_TOL:
                ok = False
        return OuterBoundReport(passed=ok, details=details)

    if sys.regime.steps_flexible:
        # exists b[m, s] >= 0 supported on S_m, sum_s b[m] <= 1, with
        # sum_m h_m mu_m b[m, s] >= load_s for every skill
        var = []
        for m, spec in enumerate(sys.agent_types):
            for s in sorted(spec.skills):
                var.append((m, s))
        rows = []
        rhs = []
        for m in range(sys.num_agent_types):
            row = np.zeros(len(var))
            for i, (mm, _s) in enumerate(var):
                if mm == m:
                    row[i] = 1.0
            rows.append(row)
            rhs.append(1.0)
        for s in range(sys.num_skills):
            row = np.zeros(len(var))
            for i, (m, ss) in enumerate(var):
                if ss == s:
                    row[i] = -sys.agent_types[m].flexible_hours * mu[m]
            rows.append(row)
            rhs.append(-float(load[s]))
        ok, point = feasible(np.array(rows), np.array(rhs))
        supply = sum(sys.agent_types[m].flexible_hours * mu[m] for m in range(sys.num_agent_types))
        details.append(("fractional cover", float(load.sum()), float(supply)))
        return OuterBoundReport(passed=ok, details=details)

    # whole steps on flexible agents: partition hypotheses
    classes: list[frozenset[int]] = []
    for spec in sys.agent_types:
        for cls in classes:
            if spec.skills == cls:
                break
            if spec.skills & cls:
                raise ConfigError(
                    "whole-step outer bound needs agent skill sets pairwise "
                    "identical or disjoint"
                )
        else:
            classes.append(spec.skills)
    sizes = sys.step_total
    if np.max(sizes) - np.min(sizes) > FEAS_TOL:
        raise ConfigError("whole-step outer bound needs one common step size")
    r_common = float(sizes[0])
    ok = True
    for cls in classes:
        cls_load = 0.0
        for idx in range(sys.num_steps):
            if sys.step_skills[idx] <= cls:
                cls_load += lam_steps[idx]
        throughput = 0.0
        for m, spec in enumerate(sys.agent_types):
            if spec.skills == cls:
                throughput += mu[m] * int((spec.flexible_hours + FEAS_TOL) / r_common)
        details.append((f"class {sorted(cls)}", float(cls_load), float(throughput)))
        if cls_load > throughput + FEAS_TOL:
            ok = False
    for idx in range(sys.num_steps):
        if lam_steps[idx] > 0 and not any(sys.step_skills[idx] <= cls for cls in classes):
            details.append((f"step {sys.step_pairs[idx]} uncoverable", float(lam_steps[idx]), 0.0))
            ok = False
    return OuterBoundReport(passed=ok, details=details)
