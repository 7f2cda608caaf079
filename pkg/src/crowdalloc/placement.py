"""Mutable per-epoch agent pool with transactional step placement.

Greedy policies, LP witness construction and residual fill all share this:
build a pool from an availability draw (or hand-built budgets, e.g. after
skill tagging), then place step instances one at a time. A placement either
commits fully or leaves the pool untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constraints import Assignment, Availability
from .model import ValidatedSystem

# hours below this are treated as exhausted to keep dust out of witnesses
EPS = 1e-12
# a poured step counts as covered when the shortfall drops below the same
# slack the allocation checker grants; atomic fits keep the tighter EPS
# because their slack overdraws agent budgets instead
COVER_TOL = 1e-9


@dataclass
class PoolAgent:
    agent: int  # global instance id
    agent_type: int
    skills: frozenset[int]
    flexible: bool
    total: float  # remaining fungible hours (flexible mode)
    per_skill: np.ndarray | None  # remaining per-skill hours (inflexible mode)

    def remaining(self, skill: int) -> float:
        if skill not in self.skills:
            return 0.0
        if self.flexible:
            return self.total
        return float(self.per_skill[skill])

    def can_hold(self, r_vec: np.ndarray, skills: frozenset[int]) -> bool:
        """Whole step on this agent alone."""
        if not skills <= self.skills:
            return False
        if self.flexible:
            return self.total + EPS >= float(r_vec.sum())
        return bool(np.all(self.per_skill + EPS >= r_vec))


class AgentPool:
    def __init__(self, agents: list[PoolAgent]):
        self.agents = agents

    @staticmethod
    def from_availability(sys: ValidatedSystem, avail: Availability) -> "AgentPool":
        agents = []
        gid = 0
        flex = sys.regime.agents_flexible
        for m, spec in enumerate(sys.agent_types):
            for _ in range(int(avail.u[m])):
                agents.append(
                    PoolAgent(
                        agent=gid,
                        agent_type=m,
                        skills=spec.skills,
                        flexible=flex,
                        total=spec.flexible_hours if flex else 0.0,
                        per_skill=None if flex else np.array(spec.inflexible_hours),
                    )
                )
                gid += 1
        return AgentPool(agents)

    def order_default(self) -> list[int]:
        """Type-major order: type index, then instance."""
        return list(range(len(self.agents)))

    def order_least_capable(self) -> list[int]:
        """Ascending skill-set size, then type, then instance."""
        return sorted(range(len(self.agents)), key=lambda i: (len(self.agents[i].skills), i))

    def order_shuffled(self, gen: np.random.Generator) -> list[int]:
        idx = np.arange(len(self.agents))
        gen.shuffle(idx)
        return [int(i) for i in idx]

    # -- internal bookkeeping ------------------------------------------------

    def _snapshot(self, touched: dict[int, tuple[float, np.ndarray | None]], i: int):
        if i not in touched:
            ag = self.agents[i]
            touched[i] = (ag.total, None if ag.per_skill is None else ag.per_skill.copy())

    def _rollback(self, touched: dict[int, tuple[float, np.ndarray | None]]):
        for i, (total, per_skill) in touched.items():
            self.agents[i].total = total
            if per_skill is not None:
                self.agents[i].per_skill = per_skill

    def _draw(self, i: int, skill: int, hours: float, touched) -> None:
        self._snapshot(touched, i)
        ag = self.agents[i]
        if ag.flexible:
            ag.total -= hours
        else:
            ag.per_skill[skill] -= hours

    # -- placement modes -----------------------------------------------------

    def _pour_substep(self, skill: float, need: float, order, touched, rows):
        """Split one substep across agents in order; False if it cannot be
        fully covered."""
        for i in order:
            if need <= COVER_TOL:
                break
            ag = self.agents[i]
            rem = ag.remaining(skill)
            if rem <= EPS:
                continue
            take = min(rem, need)
            self._draw(i, skill, take, touched)
            rows.append((i, skill, take))
            need -= take
        return need <= COVER_TOL

    def _fit_substep(self, skill: int, need: float, order, touched, rows):
        """Whole substep on the first agent that can take it."""
        for i in order:
            ag = self.agents[i]
            if ag.remaining(skill) + EPS >= need:
                self._draw(i, skill, need, touched)
                rows.append((i, skill, need))
                return True
        return False

    def place(
        self,
        step: tuple[int, int],
        r_vec: np.ndarray,
        order: list[int],
        mode: str,
    ) -> list[Assignment] | None:
        """Place one step instance; commits fully or not at all.

        Modes:
        - "split": every substep may spread over several agents
        - "atomic": every substep goes whole to one agent
        - "atomic_first": try atomic per substep, split only on failure
        - "single": the whole step binds to one agent
        """
        touched: dict[int, tuple[float, np.ndarray | None]] = {}
        rows: list[tuple[int, int, float]] = []
        ok = True
        if mode == "single":
            skills = frozenset(int(s) for s in np.nonzero(r_vec)[0])
            ok = False
            for i in order:
                if self.agents[i].can_hold(r_vec, skills):
                    for s in skills:
                        self._draw(i, s, float(r_vec[s]), touched)
                        rows.append((i, s, float(r_vec[s])))
                    ok = True
                    break
        else:
            for s in np.nonzero(r_vec)[0]:
                s = int(s)
                need = float(r_vec[s])
                if mode == "atomic":
                    done = self._fit_substep(s, need, order, touched, rows)
                elif mode == "atomic_first":
                    done = self._fit_substep(s, need, order, touched, rows)
                    if not done:
                        done = self._pour_substep(s, need, order, touched, rows)
                else:
                    done = self._pour_substep(s, need, order, touched, rows)
                if not done:
                    ok = False
                    break
        if not ok:
            self._rollback(touched)
            return None
        return [
            Assignment(
                agent=self.agents[i].agent,
                agent_type=self.agents[i].agent_type,
                step=step,
                skill=s,
                hours=h,
            )
            for i, s, h in rows
        ]
