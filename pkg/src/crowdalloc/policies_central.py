"""Centralized allocation policies.

All of them maximize (exactly or approximately) the queue-weighted service
sum for one epoch, where a step's weight aggregates how far its queue runs
ahead of each child queue, scaled by the child's subtree leaf count. Leaves
always weigh zero, so after the optimizer commits, residual capacity is
packed with zero-weight steps in decreasing-queue order; that fill is what
drains the tree bottoms.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from ._kernels import bounded_knapsack, exact_dfs
from .capacity import demand_feasible, skill_caps, subset_pools
from .constraints import Allocation, Assignment, Availability
from .errors import IntractableInstance
from .linprog import OPTIMAL, feasible, solve_lp
from .model import ValidatedSystem
from .placement import AgentPool
from .sim import PolicyContext

log = logging.getLogger(__name__)

FEAS_TOL = 1e-9
FLOOR_NUDGE = 1e-7
KNAPSACK_SCALE = 10_000


def backpressure_weights(queue, sys: ValidatedSystem) -> np.ndarray:
    """Per-step weight: sum over children of leaf_count * (Q_step - Q_child).

    Accepts a QueueState or a plain count vector.
    """
    counts = getattr(queue, "counts", queue)
    q = np.asarray(counts, dtype=np.float64)
    w = np.zeros(sys.num_steps)
    if len(sys.edge_parent):
        np.add.at(
            w,
            sys.edge_parent,
            sys.edge_leaves * (q[sys.edge_parent] - q[sys.edge_child]),
        )
    return w


def knapsack_agent(
    values: np.ndarray, sizes: np.ndarray, bounds: np.ndarray, capacity: int
) -> tuple[float, np.ndarray]:
    """Exact bounded knapsack; ties prefer lower item indices.

    values: nonnegative floats. sizes: positive ints. bounds: nonnegative
    ints. capacity: nonnegative int. A common size divisor is factored out
    before the DP, which leaves the optimum unchanged.
    """
    values = np.asarray(values, dtype=np.float64)
    sizes = np.asarray(sizes, dtype=np.int64)
    bounds = np.asarray(bounds, dtype=np.int64)
    capacity = int(capacity)
    if len(values) != len(sizes) or len(values) != len(bounds):
        raise ValueError("values, sizes, bounds must have equal length")
    if np.any(sizes < 1):
        raise ValueError("sizes must be positive integers")
    if np.any(bounds < 0) or capacity < 0 or np.any(values < 0):
        raise ValueError("bounds, capacity and values must be nonnegative")
    if len(sizes) == 0 or capacity == 0:
        return 0.0, np.zeros(len(sizes), dtype=np.int64)
    g = int(np.gcd.reduce(sizes))
    if g > 1:
        value, counts = bounded_knapsack(values, sizes // g, bounds, capacity // g)
    else:
        value, counts = bounded_knapsack(values, sizes, bounds, capacity)
    return value, counts


# -- shared pieces -------------------------------------------------------------


def _fill_zero_weight(
    sys: ValidatedSystem,
    counts: np.ndarray,
    q: np.ndarray,
    w: np.ndarray,
    caps: np.ndarray | None,
    pools: np.ndarray | None,
) -> None:
    """Greedily add zero-weight steps, largest queue first, while the
    aggregate demand stays servable. Mutates counts in place."""
    dem = counts @ sys.r_matrix
    order = sorted(
        (idx for idx in range(sys.num_steps) if w[idx] <= 0 and q[idx] > counts[idx]),
        key=lambda i: (-q[i], i),
    )
    for idx in order:
        if pools is None:
            # skill caps are separable, so the largest batch that still fits
            # comes straight from the tightest skill's slack
            r = sys.r_matrix[idx]
            nz = r > 0
            slack = caps[nz] + FEAS_TOL - dem[nz]
            extra = min(int(q[idx] - counts[idx]), int(np.floor((slack / r[nz]).min())))
            if extra > 0:
                dem = dem + r * extra
                counts[idx] += extra
            continue
        while counts[idx] < q[idx]:
            trial = dem + sys.r_matrix[idx]
            if not demand_feasible(trial, caps, pools):
                break
            dem = trial
            counts[idx] += 1


def _witness_split(sys: ValidatedSystem, avail: Availability, counts: np.ndarray):
    """Pour each substep through the pool, narrowest skill sets first so
    generalists stay in reserve. None when pouring strands hours."""
    pool = AgentPool.from_availability(sys, avail)
    order = pool.order_least_capable()
    rows: list[Assignment] = []
    for idx in np.nonzero(counts)[0]:
        idx = int(idx)
        for ordinal in range(int(counts[idx])):
            asg = pool.place((idx, ordinal), sys.r_matrix[idx], order, "split")
            if asg is None:
                return None
            rows.extend(asg)
    return rows


def _witness_transport(sys: ValidatedSystem, avail: Availability, counts: np.ndarray):
    """Witness for fungible agents and splittable steps.

    Greedy pouring can strand hours behind the wrong skills, so route the
    aggregate demand first: an LP picks per-type hours v[m, s], each instance
    gets its type's slice, and every slice behaves like a skill-bound budget.
    """
    dem = counts @ sys.r_matrix
    if not np.any(dem > 0):
        return []
    var = []
    for m, spec in enumerate(sys.agent_types):
        if avail.u[m]:
            for s in sorted(spec.skills):
                var.append((m, s))
    rows = []
    rhs = []
    for m, spec in enumerate(sys.agent_types):
        if not avail.u[m]:
            continue
        row = np.zeros(len(var))
        for i, (mm, _s) in enumerate(var):
            if mm == m:
                row[i] = 1.0
        rows.append(row)
        rhs.append(float(avail.u[m]) * spec.flexible_hours)
    for s in range(sys.num_skills):
        if dem[s] <= 0:
            continue
        row = np.zeros(len(var))
        for i, (_m, ss) in enumerate(var):
            if ss == s:
                row[i] = -1.0
        rows.append(row)
        rhs.append(-float(dem[s]))
    ok, point = feasible(np.array(rows), np.array(rhs))
    if not ok:
        raise RuntimeError("aggregate demand passed the subset check but routing failed")

    agents = AgentPool.from_availability(sys, avail).agents
    for ag in agents:
        ag.flexible = False
        ag.per_skill = np.zeros(sys.num_skills)
    for i, (m, s) in enumerate(var):
        share = float(point[i]) / float(avail.u[m])
        for ag in agents:
            if ag.agent_type == m:
                ag.per_skill[s] = share
    pool = AgentPool(agents)
    order = pool.order_default()
    out: list[Assignment] = []
    for idx in np.nonzero(counts)[0]:
        idx = int(idx)
        for ordinal in range(int(counts[idx])):
            asg = pool.place((idx, ordinal), sys.r_matrix[idx], order, "split")
            if asg is None:
                raise RuntimeError("transport witness failed to cover a step")
            out.extend(asg)
    return out


def _witness(sys: ValidatedSystem, avail: Availability, counts: np.ndarray):
    if not np.any(counts):
        return []
    rows = _witness_split(sys, avail, counts)
    if rows is not None:
        return rows
    if sys.regime.agents_flexible:
        return _witness_transport(sys, avail, counts)
    # skill-bound budgets are separable, so a feasible aggregate always pours
    raise RuntimeError("pooled hours cannot realize a feasible aggregate")


def _box_bounds(
    sys: ValidatedSystem,
    q: np.ndarray,
    caps: np.ndarray | None,
    pools: np.ndarray | None,
) -> np.ndarray:
    ub = np.zeros(sys.num_steps, dtype=np.int64)
    for idx in range(sys.num_steps):
        bound = float(q[idx])
        for s in sys.step_skills[idx]:
            supply = pools[1 << s] if pools is not None else caps[s]
            bound = min(bound, (supply + FEAS_TOL) / sys.r_matrix[idx, s])
        ub[idx] = int(bound)
    return ub


# -- policies ------------------------------------------------------------------


class CentralizedExact:
    """Exact queue-weighted optimizer over the regime's allocation set."""

    name = "centralized-exact"
    regimes = ("IF", "FF", "FI", "II")

    def __init__(self, enumeration_cap: int = 10**6):
        self.cap = enumeration_cap

    def allocate(self, ctx: PolicyContext, sys: ValidatedSystem) -> Allocation:
        q = ctx.queue.counts
        w = np.maximum(backpressure_weights(q, sys), 0.0)
        if sys.regime.steps_flexible:
            counts = self._counts_flexible(sys, ctx.avail, q, w)
            return Allocation(counts, _witness(sys, ctx.avail, counts))
        return self._packing(sys, ctx.avail, q, w)

    def _counts_flexible(self, sys, avail, q, w):
        flex = sys.regime.agents_flexible
        caps = None if flex else skill_caps(sys, avail.u)
        pools = subset_pools(sys, avail.u) if flex else None
        ub = _box_bounds(sys, q, caps, pools)
        pos = [idx for idx in range(sys.num_steps) if w[idx] > 0 and ub[idx] > 0]
        counts = np.zeros(sys.num_steps, dtype=np.int64)
        if pos:
            prod = 1.0
            for idx in pos:
                prod *= ub[idx] + 1
                if prod > self.cap:
                    raise IntractableInstance(
                        f"exact search box exceeds {self.cap} candidates"
                    )
            _best, z = exact_dfs(
                sys.r_matrix[pos],
                w[pos],
                ub[pos],
                caps if caps is not None else np.zeros(sys.num_skills),
                pools,
                1 if flex else 0,
                FEAS_TOL,
            )
            counts[pos] = z
        _fill_zero_weight(sys, counts, q, w, caps, pools)
        return counts

    def _packing(self, sys, avail, q, w):
        """Whole-step regimes: search per-agent assignment profiles."""
        flex = sys.regime.agents_flexible
        agents = []
        for m, spec in enumerate(sys.agent_types):
            for _ in range(int(avail.u[m])):
                agents.append(m)
        n_agents = len(agents)
        eligible = [
            [
                idx
                for idx in range(sys.num_steps)
                if w[idx] > 0 and q[idx] > 0 and sys.step_skills[idx] <= sys.agent_types[m].skills
            ]
            for m in agents
        ]
        # optimistic per-agent bound for pruning: each step count is capped
        # by both the queue and the agent's own budget, and a flexible agent
        # cannot beat its fractional-knapsack value
        suffix = np.zeros(n_agents + 1)
        for a in range(n_agents - 1, -1, -1):
            spec = sys.agent_types[agents[a]]
            cap_a = 0.0
            density = 0.0
            for idx in eligible[a]:
                if flex:
                    per = int((spec.flexible_hours + FEAS_TOL) / sys.step_total[idx])
                    density = max(density, w[idx] / sys.step_total[idx])
                else:
                    per = min(
                        int((spec.inflexible_hours[s] + FEAS_TOL) / sys.r_matrix[idx, s])
                        for s in sys.step_skills[idx]
                    )
                cap_a += w[idx] * min(per, int(q[idx]))
            if flex and eligible[a]:
                cap_a = min(cap_a, spec.flexible_hours * density)
            suffix[a] = suffix[a + 1] + cap_a

        rem = q.astype(np.int64).copy()
        profile = [dict() for _ in range(n_agents)]
        best_profile = [dict() for _ in range(n_agents)]
        best_val = 0.0
        nodes = 0
        cap = self.cap

        def local_budget(a):
            spec = sys.agent_types[agents[a]]
            if flex:
                return spec.flexible_hours
            return np.array(spec.inflexible_hours)

        def rec(a, budget, ti, val):
            nonlocal best_val, nodes
            nodes += 1
            if nodes > cap:
                raise IntractableInstance(f"profile search exceeded {cap} nodes")
            if a == n_agents:
                if val > best_val:
                    best_val = val
                    for i in range(n_agents):
                        best_profile[i] = dict(profile[i])
                return
            if val + suffix[a] <= best_val and best_val > 0.0:
                return
            if ti == len(eligible[a]):
                rec(a + 1, local_budget(a + 1) if a + 1 < n_agents else None, 0, val)
                return
            idx = eligible[a][ti]
            rec(a, budget, ti + 1, val)
            # budget is rebound, never mutated, so callers keep their value
            z = 0
            while rem[idx] > 0:
                if flex:
                    if budget + FEAS_TOL < sys.step_total[idx]:
                        break
                    budget = budget - sys.step_total[idx]
                else:
                    if not np.all(budget + FEAS_TOL >= sys.r_matrix[idx]):
                        break
                    budget = budget - sys.r_matrix[idx]
                z += 1
                rem[idx] -= 1
                profile[a][idx] = z
                rec(a, budget, ti + 1, val + z * w[idx])
            rem[idx] += z
            profile[a].pop(idx, None)

        if n_agents:
            rec(0, local_budget(0), 0, 0.0)
        else:
            best_profile = []

        counts = np.zeros(sys.num_steps, dtype=np.int64)
        rows: list[Assignment] = []
        pool = AgentPool.from_availability(sys, avail)
        for a in range(n_agents):
            for idx, z in sorted(best_profile[a].items()):
                for _ in range(z):
                    ordinal = int(counts[idx])
                    counts[idx] += 1
                    for s in sys.step_skills[idx]:
                        hours = float(sys.r_matrix[idx, s])
                        ag = pool.agents[a]
                        if ag.flexible:
                            ag.total -= hours
                        else:
                            ag.per_skill[s] -= hours
                        rows.append(
                            Assignment(
                                agent=ag.agent,
                                agent_type=ag.agent_type,
                                step=(idx, ordinal),
                                skill=int(s),
                                hours=hours,
                            )
                        )
        # zero-weight fill on the remaining budgets, whole steps only
        order = pool.order_default()
        fill = sorted(
            (idx for idx in range(sys.num_steps) if w[idx] <= 0 and q[idx] > counts[idx]),
            key=lambda i: (-q[i], i),
        )
        for idx in fill:
            while counts[idx] < q[idx]:
                asg = pool.place((idx, int(counts[idx])), sys.r_matrix[idx], order, "single")
                if asg is None:
                    break
                counts[idx] += 1
                rows.extend(asg)
        return Allocation(counts, rows)


class CentralizedLpIf:
    """LP relaxation for skill-bound agents and splittable steps: aggregate
    per-skill supply, queue box, floor, fill, pour."""

    name = "lp-if"
    regimes = ("IF",)

    def allocate(self, ctx: PolicyContext, sys: ValidatedSystem) -> Allocation:
        q = ctx.queue.counts
        w = np.maximum(backpressure_weights(q, sys), 0.0)
        caps = skill_caps(sys, ctx.avail.u)
        counts = np.zeros(sys.num_steps, dtype=np.int64)
        pos = [idx for idx in range(sys.num_steps) if w[idx] > 0 and q[idx] > 0]
        if pos:
            r_pos = sys.r_matrix[pos]
            npos = len(pos)
            rows = [r_pos[:, s] for s in range(sys.num_skills)]
            rhs = [caps[s] for s in range(sys.num_skills)]
            for i in range(npos):
                row = np.zeros(npos)
                row[i] = 1.0
                rows.append(row)
                rhs.append(float(q[pos[i]]))
            sol = solve_lp(w[pos], np.array(rows), np.array(rhs))
            if sol.status != OPTIMAL:
                raise RuntimeError(f"aggregate LP ended {sol.status}")
            floored = np.floor(sol.x + FLOOR_NUDGE).astype(np.int64)
            floored = np.minimum(floored, q[pos])
            self._repair(sys, pos, floored, caps)
            counts[pos] = floored
        _fill_zero_weight(sys, counts, q, w, caps, None)
        return Allocation(counts, _witness(sys, ctx.avail, counts))

    @staticmethod
    def _repair(sys, pos, floored, caps):
        # the floor nudge can only overshoot by one unit on razor-thin ties
        dem = floored @ sys.r_matrix[pos]
        guard = 0
        while np.any(dem > caps + FEAS_TOL):
            s = int(np.nonzero(dem > caps + FEAS_TOL)[0][0])
            for i, idx in enumerate(pos):
                if floored[i] > 0 and sys.r_matrix[idx, s] > 0:
                    floored[i] -= 1
                    dem = floored @ sys.r_matrix[pos]
                    break
            guard += 1
            if guard > 10_000:
                raise RuntimeError("could not repair a floored LP point")


class CentralizedLpFf:
    """LP relaxation for fungible agents: step counts plus per-type budget
    fractions, floored and realized through the hour router."""

    name = "lp-ff"
    regimes = ("FF",)

    def allocate(self, ctx: PolicyContext, sys: ValidatedSystem) -> Allocation:
        q = ctx.queue.counts
        w = np.maximum(backpressure_weights(q, sys), 0.0)
        pools = subset_pools(sys, ctx.avail.u)
        counts = np.zeros(sys.num_steps, dtype=np.int64)
        pos = [idx for idx in range(sys.num_steps) if w[idx] > 0 and q[idx] > 0]
        if pos:
            var_alpha = []
            for m, spec in enumerate(sys.agent_types):
                for s in sorted(spec.skills):
                    var_alpha.append((m, s))
            npos = len(pos)
            nvar = npos + len(var_alpha)
            rows = []
            rhs = []
            for m in range(sys.num_agent_types):
                row = np.zeros(nvar)
                for i, (mm, _s) in enumerate(var_alpha):
                    if mm == m:
                        row[npos + i] = 1.0
                rows.append(row)
                rhs.append(1.0)
            for s in range(sys.num_skills):
                row = np.zeros(nvar)
                row[:npos] = sys.r_matrix[pos, s]
                for i, (m, ss) in enumerate(var_alpha):
                    if ss == s:
                        row[npos + i] = -float(ctx.avail.u[m]) * sys.agent_types[m].flexible_hours
                rows.append(row)
                rhs.append(0.0)
            for i in range(npos):
                row = np.zeros(nvar)
                row[i] = 1.0
                rows.append(row)
                rhs.append(float(q[pos[i]]))
            c = np.zeros(nvar)
            c[:npos] = w[pos]
            sol = solve_lp(c, np.array(rows), np.array(rhs))
            if sol.status != OPTIMAL:
                raise RuntimeError(f"aggregate LP ended {sol.status}")
            floored = np.floor(sol.x[:npos] + FLOOR_NUDGE).astype(np.int64)
            floored = np.minimum(floored, q[pos])
            # flooring can only shrink demand, so the subset condition holds;
            # trim defensively if numeric noise says otherwise
            guard = 0
            tmp = np.zeros(sys.num_steps, dtype=np.int64)
            tmp[pos] = floored
            while not demand_feasible(tmp @ sys.r_matrix, None, pools):
                i = int(np.nonzero(floored > 0)[0][0])
                floored[i] -= 1
                tmp[pos] = floored
                guard += 1
                if guard > 10_000:
                    raise RuntimeError("could not repair a floored LP point")
            counts[pos] = floored
        _fill_zero_weight(sys, counts, q, w, None, pools)
        return Allocation(counts, _witness(sys, ctx.avail, counts))


class CentralizedFiDecomposition:
    """Fungible agents, whole steps: sequential per-agent bounded knapsacks
    over scaled integer sizes, then zero-weight fill."""

    name = "fi-decomposition"
    regimes = ("FI",)

    def __init__(self):
        self._warned: set[int] = set()

    def allocate(self, ctx: PolicyContext, sys: ValidatedSystem) -> Allocation:
        q = ctx.queue.counts
        w = np.maximum(backpressure_weights(q, sys), 0.0)
        sizes = np.array(
            [
                max(1, math.ceil(sys.step_total[idx] * KNAPSACK_SCALE - FEAS_TOL))
                for idx in range(sys.num_steps)
            ],
            dtype=np.int64,
        )
        for idx in range(sys.num_steps):
            if idx not in self._warned and not any(
                sys.step_skills[idx] <= spec.skills for spec in sys.agent_types
            ):
                self._warned.add(idx)
                log.warning(
                    "step type %s fits no single agent type and will be skipped",
                    sys.step_pairs[idx],
                )
        rem = q.astype(np.int64).copy()
        counts = np.zeros(sys.num_steps, dtype=np.int64)
        rows: list[Assignment] = []
        pool = AgentPool.from_availability(sys, avail=ctx.avail)
        for ag in pool.agents:
            spec = sys.agent_types[ag.agent_type]
            eligible = [
                idx
                for idx in range(sys.num_steps)
                if w[idx] > 0 and rem[idx] > 0 and sys.step_skills[idx] <= spec.skills
            ]
            if not eligible:
                continue
            capacity = int(spec.flexible_hours * KNAPSACK_SCALE + FEAS_TOL)
            _val, z = knapsack_agent(w[eligible], sizes[eligible], rem[eligible], capacity)
            for i, idx in enumerate(eligible):
                for _ in range(int(z[i])):
                    ordinal = int(counts[idx])
                    counts[idx] += 1
                    rem[idx] -= 1
                    ag.total -= float(sys.step_total[idx])
                    for s in sys.step_skills[idx]:
                        rows.append(
                            Assignment(
                                agent=ag.agent,
                                agent_type=ag.agent_type,
                                step=(idx, ordinal),
                                skill=int(s),
                                hours=float(sys.r_matrix[idx, s]),
                            )
                        )
        order = pool.order_default()
        fill = sorted(
            (idx for idx in range(sys.num_steps) if w[idx] <= 0 and q[idx] > counts[idx]),
            key=lambda i: (-q[i], i),
        )
        for idx in fill:
            while counts[idx] < q[idx]:
                asg = pool.place((idx, int(counts[idx])), sys.r_matrix[idx], order, "single")
                if asg is None:
                    break
                counts[idx] += 1
                rows.extend(asg)
        return Allocation(counts, rows)
