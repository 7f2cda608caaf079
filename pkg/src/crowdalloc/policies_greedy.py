"""Decentralized greedy allocation policies.

All of them serve queued step instances oldest first (seeded uniform
tie-breaks) and only ever serve a FIFO prefix per step type: once an
instance of a type cannot be placed, the type is blocked for the epoch.
They differ in who may hold a step and how hours are carved up.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constraints import Allocation, Assignment
from .linprog import feasible
from .model import ValidatedSystem, depth_classes
from .placement import AgentPool, PoolAgent
from .sim import PolicyContext, QueueState


def _serve_tokens(
    sys: ValidatedSystem,
    pool: AgentPool,
    queue: QueueState,
    tokens: list,
    order: list[int],
    mode: str,
    counts: np.ndarray,
    rows: list[Assignment],
) -> None:
    """Place one queued instance per token; tokens carry (sort key..., idx).

    A placement failure blocks the step type: instances of one type are
    identical, and serving out of FIFO order is not allowed anyway.
    """
    tokens.sort()
    blocked: set[int] = set()
    for tok in tokens:
        idx = tok[-1]
        if idx in blocked:
            continue
        asg = pool.place((idx, int(counts[idx])), sys.r_matrix[idx], order, mode)
        if asg is None:
            blocked.add(idx)
        else:
            rows.extend(asg)
            counts[idx] += 1


def _depth_tokens(queue: QueueState, idxs: list[int], gen: np.random.Generator):
    out = []
    for idx in idxs:
        for rel in queue.release_epochs(idx):
            out.append((rel, gen.random(), idx))
    return out


def _greedy_core(
    sys: ValidatedSystem,
    pool: AgentPool,
    queue: QueueState,
    gen: np.random.Generator,
    order: list[int],
    mode: str,
) -> tuple[np.ndarray, list[Assignment]]:
    """Depth by depth, oldest first, place whatever fits."""
    counts = np.zeros(sys.num_steps, dtype=np.int64)
    rows: list[Assignment] = []
    for idxs in depth_classes(sys):
        tokens = _depth_tokens(queue, idxs, gen)
        _serve_tokens(sys, pool, queue, tokens, order, mode, counts, rows)
    return counts, rows


class PrioritizedGreedy:
    """Skill-bound agents, splittable steps: shallow steps outrank deep
    ones, hours pour across every agent holding the skill."""

    name = "prioritized-greedy"
    regimes = ("IF",)

    def allocate(self, ctx: PolicyContext, sys: ValidatedSystem) -> Allocation:
        pool = AgentPool.from_availability(sys, ctx.avail)
        counts, rows = _greedy_core(
            sys, pool, ctx.queue, ctx.rng, pool.order_default(), "split"
        )
        return Allocation(counts, rows)


@dataclass
class FlexGreedyState:
    """Running-average rate estimates for the tagging policy."""

    t0: int
    abar: np.ndarray
    ubar: np.ndarray


class FlexGreedy:
    """Fungible agents, splittable steps. Each epoch the policy estimates
    arrival and availability rates, solves for per-type skill-tagging
    probabilities whose tagged supply covers the estimated load with slack
    epsilon, tags every available agent with one skill (or leaves it idle),
    and then runs the prioritized pour on the tagged, now skill-bound, pool.

    One instance per simulation run; the estimates carry across epochs.
    """

    name = "flex-greedy"
    regimes = ("FF",)

    def __init__(self, epsilon: float = 0.05, gamma=None):
        if not 0.0 < epsilon < 1.0:
            raise ValueError("epsilon must sit strictly between 0 and 1")
        self.epsilon = epsilon
        self.gamma = gamma if gamma is not None else (lambda k: 1.0 / (k + 1.0))
        self.state: FlexGreedyState | None = None
        # hours each task type asks of each skill over its whole tree
        self._task_skill_hours: np.ndarray | None = None

    def _update(self, ctx: PolicyContext, sys: ValidatedSystem) -> FlexGreedyState:
        st = self.state
        if st is None or ctx.t < st.t0:
            st = FlexGreedyState(
                t0=ctx.t,
                abar=np.ones(sys.num_task_types),
                ubar=np.ones(sys.num_agent_types),
            )
            self.state = st
        g = float(self.gamma(ctx.t - st.t0))
        st.abar = (1.0 - g) * st.abar + g * ctx.arrivals.astype(np.float64)
        st.ubar = (1.0 - g) * st.ubar + g * ctx.avail.u.astype(np.float64)
        return st

    def _psi(self, sys: ValidatedSystem, st: FlexGreedyState, gen) -> dict:
        if self._task_skill_hours is None:
            rows = np.zeros((sys.num_task_types, sys.num_skills))
            for j, tt in enumerate(sys.task_types):
                lo = sys.offsets[j]
                rows[j] = sys.r_matrix[lo : lo + tt.tree.num_steps].sum(axis=0)
            self._task_skill_hours = rows
        demand = st.abar @ self._task_skill_hours

        var = []
        for m, spec in enumerate(sys.agent_types):
            for s in sorted(spec.skills):
                var.append((m, s))
        a_rows = []
        b = []
        for m in range(sys.num_agent_types):
            row = np.zeros(len(var))
            for i, (mm, _s) in enumerate(var):
                if mm == m:
                    row[i] = 1.0
            a_rows.append(row)
            b.append(1.0)
        keep = 1.0 - self.epsilon
        for s in range(sys.num_skills):
            row = np.zeros(len(var))
            for i, (m, ss) in enumerate(var):
                if ss == s:
                    row[i] = -keep * st.ubar[m] * sys.agent_types[m].flexible_hours
            a_rows.append(row)
            b.append(-float(demand[s]))
        ok, point = feasible(np.array(a_rows), np.array(b))
        psi = {}
        if ok:
            for i, (m, s) in enumerate(var):
                psi[(m, s)] = float(point[i])
            return psi
        # estimated load is not coverable with slack; tag along a random
        # point of each type's skill simplex instead
        for m, spec in enumerate(sys.agent_types):
            skills = sorted(spec.skills)
            e = gen.exponential(1.0, len(skills))
            e /= e.sum()
            for s, p in zip(skills, e):
                psi[(m, s)] = float(p)
        return psi

    def allocate(self, ctx: PolicyContext, sys: ValidatedSystem) -> Allocation:
        st = self._update(ctx, sys)
        psi = self._psi(sys, st, ctx.rng)
        agents: list[PoolAgent] = []
        gid = 0
        for m, spec in enumerate(sys.agent_types):
            skills = sorted(spec.skills)
            cum = np.cumsum([psi.get((m, s), 0.0) for s in skills])
            for _ in range(int(ctx.avail.u[m])):
                u = ctx.rng.random()
                pick = int(np.searchsorted(cum, u, side="right"))
                if pick < len(skills):
                    s = skills[pick]
                    per = np.zeros(sys.num_skills)
                    per[s] = spec.flexible_hours
                    agents.append(
                        PoolAgent(
                            agent=gid,
                            agent_type=m,
                            skills=frozenset((s,)),
                            flexible=False,
                            total=spec.flexible_hours,
                            per_skill=per,
                        )
                    )
                gid += 1
        pool = AgentPool(agents)
        order = list(range(len(agents)))
        counts, rows = _greedy_core(sys, pool, ctx.queue, ctx.rng, order, "split")
        return Allocation(counts, rows)


def build_priority_classes(skill_sets) -> list[list[frozenset]]:
    """Order skill sets into tiers by repeated extraction of the
    set-inclusion-maximal ones; broader sets get served first."""
    remaining = {frozenset(s) for s in skill_sets}
    tiers: list[list[frozenset]] = []
    while remaining:
        tier = [s for s in remaining if not any(s < t for t in remaining)]
        tier.sort(key=lambda s: (-len(s), sorted(s)))
        tiers.append(tier)
        remaining.difference_update(tier)
    return tiers


class RestrictedGreedy:
    """Fungible agents, whole steps. Within a depth, steps with broader
    skill sets are placed first, and the least capable agents are tried
    first, saving versatile agents for the steps that need them."""

    name = "restricted-greedy"
    regimes = ("FI",)

    def allocate(self, ctx: PolicyContext, sys: ValidatedSystem) -> Allocation:
        pool = AgentPool.from_availability(sys, ctx.avail)
        order = pool.order_least_capable()
        counts = np.zeros(sys.num_steps, dtype=np.int64)
        rows: list[Assignment] = []
        for idxs in depth_classes(sys):
            for tier in build_priority_classes({sys.step_skills[i] for i in idxs}):
                tier_sets = set(tier)
                members = [i for i in idxs if sys.step_skills[i] in tier_sets]
                tokens = _depth_tokens(ctx.queue, members, ctx.rng)
                _serve_tokens(
                    sys, pool, ctx.queue, tokens, order, "single", counts, rows
                )
        return Allocation(counts, rows)


class _TraceGreedy:
    """Shared frame for the trace-replay policies: fungible agents in a
    fresh seeded order each epoch."""

    regimes = ("FF",)
    mode = "split"

    def allocate(self, ctx: PolicyContext, sys: ValidatedSystem) -> Allocation:
        pool = AgentPool.from_availability(sys, ctx.avail)
        order = pool.order_shuffled(ctx.rng)
        counts, rows = _greedy_core(sys, pool, ctx.queue, ctx.rng, order, self.mode)
        return Allocation(counts, rows)


class Algo1(_TraceGreedy):
    """Substeps go whole onto one agent when any agent still fits them,
    and split across several only when none does."""

    name = "algo1"
    mode = "atomic_first"


class Algo2(_TraceGreedy):
    """Substeps go whole onto one agent or not at all."""

    name = "algo2"
    mode = "atomic"


class Algo3:
    """Whole steps bind to single agents, broadest skill set first."""

    name = "algo3"
    regimes = ("FF",)

    def allocate(self, ctx: PolicyContext, sys: ValidatedSystem) -> Allocation:
        pool = AgentPool.from_availability(sys, ctx.avail)
        order = pool.order_shuffled(ctx.rng)
        counts = np.zeros(sys.num_steps, dtype=np.int64)
        rows: list[Assignment] = []
        tokens = []
        for idx in range(sys.num_steps):
            width = len(sys.step_skills[idx])
            for rel in ctx.queue.release_epochs(idx):
                tokens.append((-width, rel, ctx.rng.random(), idx))
        _serve_tokens(sys, pool, ctx.queue, tokens, order, "single", counts, rows)
        return Allocation(counts, rows)
