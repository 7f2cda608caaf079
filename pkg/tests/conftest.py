"""Shared builders for the test suite.

The fuzz helpers live here so every suite draws instances the same way:
agents first, then tasks whose skills come from the union of agent skills,
so validate_config's coverage rule holds by construction.
"""

from __future__ import annotations

import numpy as np
import pytest

from crowdalloc.model import ValidatedSystem, validate_config
from crowdalloc.processes import ProcessBundle, bundle_from_config
from crowdalloc.sim import PolicyContext, QueueState


def build(doc: dict) -> tuple[ValidatedSystem, ProcessBundle]:
    sys = validate_config(doc)
    return sys, bundle_from_config(doc, sys)


def t1_doc() -> dict:
    """Two single-skill specialists, one two-step chain task. The boundary
    along ray (1,) sits at 2.0 tasks per epoch."""
    return {
        "skills": 2,
        "regime": "IF",
        "agent_types": [
            {"skills": [0], "hours": {"0": 1.0}},
            {"skills": [1], "hours": {"1": 1.0}},
        ],
        "task_types": [
            {
                "steps": [{"0": 0.5}, {"1": 0.5}],
                "parents": [-1, 0],
                "rate": 1.0,
                "arrivals": {"kind": "deterministic", "value": 1},
            }
        ],
    }


@pytest.fixture
def t1():
    doc = t1_doc()
    sys, bundle = build(doc)
    return sys, bundle, doc


def random_doc(gen: np.random.Generator, regime: str) -> dict:
    """Small random instance; every step's skills are drawn from the union
    of agent skills, and steps stay small enough for the exact policies."""
    num_skills = int(gen.integers(1, 4))
    num_agents = int(gen.integers(1, 4))
    agent_types = []
    union: set[int] = set()
    flexible = regime[0] == "F"
    for _ in range(num_agents):
        k = int(gen.integers(1, num_skills + 1))
        skills = sorted(gen.choice(num_skills, size=k, replace=False).tolist())
        union.update(skills)
        if flexible:
            agent_types.append({"skills": skills, "hours": float(gen.uniform(0.5, 2.0))})
        else:
            hours = {str(s): float(gen.uniform(0.3, 1.5)) for s in skills}
            agent_types.append({"skills": skills, "hours": hours})
    pool = sorted(union)
    task_types = []
    for _ in range(int(gen.integers(1, 3))):
        n_steps = int(gen.integers(1, 5))
        parents = [-1] + [int(gen.integers(0, i)) for i in range(1, n_steps)]
        steps = []
        for _ in range(n_steps):
            k = int(gen.integers(1, min(2, len(pool)) + 1))
            sel = gen.choice(len(pool), size=k, replace=False)
            steps.append({str(pool[i]): float(gen.uniform(0.2, 0.9)) for i in sel})
        task_types.append(
            {"steps": steps, "parents": parents, "rate": float(gen.uniform(0.1, 1.0))}
        )
    return {
        "skills": num_skills,
        "regime": regime,
        "agent_types": agent_types,
        "task_types": task_types,
    }


def random_queue(gen: np.random.Generator, sys: ValidatedSystem, hi: int = 5) -> QueueState:
    queue = QueueState(sys.num_steps)
    uid = 0
    for idx in range(sys.num_steps):
        for _ in range(int(gen.integers(0, hi))):
            queue.push(idx, uid, int(gen.integers(1, 4)))
            uid += 1
    return queue


def ctx_for(
    sys: ValidatedSystem,
    queue: QueueState,
    u: np.ndarray,
    t: int = 1,
    seed: int = 0,
) -> PolicyContext:
    from crowdalloc.constraints import Availability

    return PolicyContext(
        t=t,
        queue=queue,
        avail=Availability(u=np.asarray(u, dtype=np.int64)),
        arrivals=np.zeros(len(sys.task_types), dtype=np.int64),
        rng_factory=lambda: np.random.default_rng(seed),
    )
