"""Agent pool placement: pour/fit/single modes, rollback, and orders."""

from __future__ import annotations

import numpy as np

from conftest import build, t1_doc
from crowdalloc.constraints import Availability, check_allocation, Allocation
from crowdalloc.placement import AgentPool


def ff_sys(hours=(1.0, 1.0), skills=((0, 1), (0, 1))):
    doc = t1_doc()
    doc["regime"] = "FF"
    doc["agent_types"] = [
        {"skills": list(sk), "hours": h} for sk, h in zip(skills, hours)
    ]
    sys, _ = build(doc)
    return sys


def test_split_pour_spans_agents():
    sys = ff_sys(hours=(0.5, 0.3))
    pool = AgentPool.from_availability(sys, Availability(u=np.array([1, 1])))
    rows = pool.place((0, 0), np.array([0.8, 0.0]), pool.order_default(), "split")
    assert rows is not None
    poured = sorted((a.agent, round(a.hours, 12)) for a in rows)
    assert poured == [(0, 0.5), (1, 0.3)]  # 0.8 = 0.5 + 0.3 in agent order
    # nothing left: placing any more skill-0 work fails and rolls back
    again = pool.place((0, 1), np.array([0.1, 0.0]), pool.order_default(), "split")
    assert again is None
    assert sum(ag.total for ag in pool.agents) == 0.0


def test_atomic_requires_single_agent_capacity():
    sys = ff_sys(hours=(0.5, 0.3))
    pool = AgentPool.from_availability(sys, Availability(u=np.array([1, 1])))
    assert pool.place((0, 0), np.array([0.8, 0.0]), pool.order_default(), "atomic") is None
    # rollback left both budgets whole
    assert [ag.total for ag in pool.agents] == [0.5, 0.3]
    rows = pool.place((0, 0), np.array([0.4, 0.0]), pool.order_default(), "atomic")
    assert rows is not None and len(rows) == 1 and rows[0].agent == 0


def test_atomic_first_falls_back_to_pour():
    sys = ff_sys(hours=(0.5, 0.3))
    pool = AgentPool.from_availability(sys, Availability(u=np.array([1, 1])))
    rows = pool.place((0, 0), np.array([0.8, 0.0]), pool.order_default(), "atomic_first")
    assert rows is not None and len(rows) == 2


def test_single_binds_whole_step_to_one_agent():
    sys = ff_sys(hours=(0.6, 1.0))
    pool = AgentPool.from_availability(sys, Availability(u=np.array([1, 1])))
    r = np.array([0.4, 0.4])
    rows = pool.place((0, 0), r, pool.order_default(), "single")
    assert rows is not None
    assert {a.agent for a in rows} == {1}  # agent 0 cannot hold 0.8 in total
    assert sum(a.hours for a in rows) == 0.8


def test_single_respects_skill_sets():
    sys = ff_sys(hours=(2.0, 2.0), skills=((0,), (0, 1)))
    pool = AgentPool.from_availability(sys, Availability(u=np.array([1, 1])))
    rows = pool.place((0, 0), np.array([0.3, 0.3]), pool.order_default(), "single")
    assert rows is not None and {a.agent for a in rows} == {1}


def test_rollback_is_exact_across_substeps():
    # first substep fits, second cannot: the draw on skill 0 must be undone
    doc = t1_doc()
    sys, _ = build(doc)
    pool = AgentPool.from_availability(sys, Availability(u=np.array([1, 0])))
    rows = pool.place((0, 0), np.array([0.5, 0.5]), pool.order_default(), "split")
    assert rows is None
    assert pool.agents[0].per_skill.tolist() == [1.0, 0.0]


def test_orders():
    sys = ff_sys(hours=(1.0, 1.0), skills=((0, 1), (0,)))
    pool = AgentPool.from_availability(sys, Availability(u=np.array([2, 1])))
    assert pool.order_default() == [0, 1, 2]
    # least capable first: the single-skill agent leads
    assert pool.order_least_capable() == [2, 0, 1]
    shuffled = pool.order_shuffled(np.random.default_rng(0))
    assert sorted(shuffled) == [0, 1, 2]
    assert pool.order_shuffled(np.random.default_rng(0)) == shuffled


def test_witness_rows_satisfy_checker():
    doc = t1_doc()
    doc["regime"] = "FF"
    doc["agent_types"] = [{"skills": [0, 1], "hours": 0.5}, {"skills": [0, 1], "hours": 0.9}]
    doc["task_types"][0]["steps"] = [{"0": 0.3, "1": 0.2}, {"1": 0.5}]
    sys, _ = build(doc)
    avail = Availability(u=np.array([1, 1]))
    pool = AgentPool.from_availability(sys, avail)
    rows = []
    counts = np.zeros(2, dtype=np.int64)
    for ordinal in range(2):
        placed = pool.place((0, ordinal), sys.r_matrix[0], pool.order_default(), "split")
        assert placed is not None
        rows.extend(placed)
        counts[0] += 1
    assert check_allocation(sys, avail, Allocation(counts, rows)) is None
