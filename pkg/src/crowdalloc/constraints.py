"""Allocation records and the per-regime feasibility checker.

An allocation is counts per step type plus a witness: explicit
(agent instance, step instance, skill, hours) assignment rows. The checker
re-derives every constraint from the witness alone, so a passing allocation
is feasible by construction, not by trust in the policy that built it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ValidatedSystem

CHECK_TOL = 1e-9


@dataclass(frozen=True)
class Availability:
    """Realized agent counts per type for one epoch. Agent instances get
    global ids, type-major: type m occupies [offset[m], offset[m] + u[m])."""

    u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=np.int64))

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum(self.u)[:-1])) if len(self.u) else np.zeros(0, np.int64)

    @property
    def total(self) -> int:
        return int(self.u.sum())


@dataclass(frozen=True)
class Assignment:
    agent: int  # global agent instance id
    agent_type: int
    step: tuple[int, int]  # (global step type index, instance ordinal)
    skill: int
    hours: float


@dataclass
class Allocation:
    counts: np.ndarray  # int64 per global step type
    assignments: list[Assignment]

    @staticmethod
    def empty(num_steps: int) -> "Allocation":
        return Allocation(counts=np.zeros(num_steps, dtype=np.int64), assignments=[])


@dataclass(frozen=True)
class Violation:
    """First failed constraint, with the offending agent/step when known."""

    message: str

    def __str__(self) -> str:
        return self.message


def check_allocation(
    sys: ValidatedSystem,
    avail: Availability,
    alloc: Allocation,
    tol: float = CHECK_TOL,
) -> Violation | None:
    """Verify an allocation against queue-free structural constraints.

    Returns None when every check passes, otherwise the first Violation.
    Queue bounds are the engine's concern; this checks the witness itself:
    full coverage of every counted step instance, per-agent budgets, skill
    membership, and single-agent binding when steps are inflexible.
    """
    counts = np.asarray(alloc.counts)
    if counts.shape != (sys.num_steps,):
        return Violation(f"counts has shape {counts.shape}, expected ({sys.num_steps},)")
    if np.any(counts < 0):
        return Violation("negative step count")

    offsets = avail.offsets
    u = avail.u
    if len(u) != sys.num_agent_types:
        return Violation("availability vector length does not match agent types")

    received: dict[tuple[int, int], np.ndarray] = {}
    agent_used: dict[int, np.ndarray] = {}
    agent_of_step: dict[tuple[int, int], set[int]] = {}

    for a in alloc.assignments:
        jk, ordinal = a.step
        if not 0 <= jk < sys.num_steps:
            return Violation(f"assignment references unknown step type {jk}")
        if not 0 <= ordinal < counts[jk]:
            return Violation(f"assignment references step instance {a.step} beyond counts")
        if a.hours < 0:
            return Violation(f"negative hours on step {a.step}")
        if not 0 <= a.skill < sys.num_skills:
            return Violation(f"assignment references unknown skill {a.skill}")
        if not 0 <= a.agent_type < sys.num_agent_types:
            return Violation(f"assignment references unknown agent type {a.agent_type}")
        lo = offsets[a.agent_type]
        if not lo <= a.agent < lo + u[a.agent_type]:
            return Violation(
                f"agent {a.agent} is not an available instance of type {a.agent_type}"
            )
        if sys.r_matrix[jk, a.skill] <= 0:
            return Violation(f"step type {jk} has no skill-{a.skill} substep")
        rec = received.setdefault(a.step, np.zeros(sys.num_skills))
        rec[a.skill] += a.hours
        used = agent_used.setdefault(a.agent, np.zeros(sys.num_skills))
        used[a.skill] += a.hours
        agent_of_step.setdefault(a.step, set()).add(a.agent)

    expected = {(jk, i) for jk in range(sys.num_steps) for i in range(int(counts[jk]))}
    if set(received) != expected:
        missing = expected - set(received)
        extra = set(received) - expected
        which = sorted(missing or extra)[0]
        return Violation(f"counts do not match witnessed step instances (e.g. {which})")

    for (jk, ordinal), rec in received.items():
        need = sys.r_matrix[jk]
        short = need - rec
        bad = np.nonzero(short > tol)[0]
        if len(bad):
            s = int(bad[0])
            return Violation(
                f"step ({jk},{ordinal}) received {rec[s]:.12g}h of skill {s}, needs {need[s]:.12g}h"
            )

    if not sys.regime.steps_flexible:
        for step, agents in agent_of_step.items():
            if len(agents) > 1:
                return Violation(f"inflexible step {step} split across agents {sorted(agents)}")

    flexible = sys.regime.agents_flexible
    for agent, used in agent_used.items():
        m = int(np.searchsorted(offsets, agent, side="right") - 1)
        spec = sys.agent_types[m]
        off_skill = [s for s in np.nonzero(used)[0] if int(s) not in spec.skills]
        if off_skill:
            return Violation(f"agent {agent} (type {m}) used missing skill {off_skill[0]}")
        if flexible:
            if used.sum() > spec.flexible_hours + tol:
                return Violation(
                    f"agent {agent} (type {m}) used {used.sum():.12g}h of {spec.flexible_hours}h"
                )
        else:
            h = np.asarray(spec.inflexible_hours)
            bad = np.nonzero(used - h > tol)[0]
            if len(bad):
                s = int(bad[0])
                return Violation(
                    f"agent {agent} (type {m}) used {used[s]:.12g}h of skill {s}, budget {h[s]:.12g}h"
                )
    return None


@dataclass(frozen=True)
class HourAggregate:
    """Pooled hour supply for one availability draw.

    per_skill[s] is the exact pooled budget when agents are inflexible; with
    flexible agents it is the eligible pool (every agent holding s counted in
    full), an upper bound usable for box bounds.
    """

    per_skill: np.ndarray
    total: float


def aggregate_hours(sys: ValidatedSystem, avail: Availability) -> HourAggregate:
    per_skill = np.zeros(sys.num_skills)
    total = 0.0
    for m, spec in enumerate(sys.agent_types):
        cnt = float(avail.u[m])
        per_skill += cnt * spec.hours_vector(sys.num_skills, sys.regime.agents_flexible)
        total += cnt * spec.total_hours(sys.regime.agents_flexible)
    return HourAggregate(per_skill=per_skill, total=total)
