"""Acceptance suite: fuzz-scale feasibility, solver-vs-enumeration oracles,
capacity boundaries, stability dichotomies, greedy scaling trends, trace
workload comparisons, and byte determinism, each with a pinned budget."""

from __future__ import annotations

import json
import time

import numpy as np
import pytest

from conftest import build, ctx_for, random_doc, random_queue, t1_doc
from crowdalloc.capacity import boundary_scalar, capacity_member, outer_bound_check
from crowdalloc.cli import main
from crowdalloc.constraints import Availability, check_allocation
from crowdalloc.model import validate_config
from crowdalloc.policies_central import backpressure_weights, knapsack_agent
from crowdalloc.processes import gamma_from_specs
from crowdalloc.registry import make_policy
from crowdalloc.sim import PolicyContext, run
from crowdalloc.traceio import WorkerPoolSpec, compile_workload, gen_synthetic
from test_policies_central import brute_best_weighted, draw_bounded

REGIME_POLICIES = {
    "IF": ["centralized-exact", "lp-if", "prioritized-greedy"],
    "FF": ["centralized-exact", "lp-ff", "flex-greedy", "algo1", "algo2", "algo3"],
    "FI": ["centralized-exact", "fi-decomposition", "restricted-greedy"],
    "II": ["centralized-exact"],
}


def test_feasibility_master_suite():
    """10,000 fuzzed (system, queue, availability, arrivals) cases cycling
    through every policy: every emitted allocation must verify and stay within
    the queue."""
    pairs = [(rg, name) for rg, names in REGIME_POLICIES.items() for name in names]
    gen = np.random.default_rng(np.random.SeedSequence([100]))
    t0 = time.perf_counter()
    for i in range(10_000):
        regime, name = pairs[i % len(pairs)]
        if regime in ("FI", "II") and name == "centralized-exact":
            # whole-step packing search grows fast; keep those draws narrow
            sys = draw_bounded(gen, regime, max_steps=3, max_agent_types=2)
        else:
            sys = draw_bounded(gen, regime, max_steps=8)
        queue = random_queue(gen, sys, hi=5)
        u = gen.integers(0, 3, sys.num_agent_types)
        ctx = PolicyContext(
            t=1,
            queue=queue,
            avail=Availability(u=u),
            arrivals=gen.integers(0, 4, len(sys.task_types)),
            rng_factory=lambda i=i: np.random.default_rng(i),
        )
        alloc = make_policy(name, regime).allocate(ctx, sys)
        bad = check_allocation(sys, ctx.avail, alloc)
        assert bad is None, (i, regime, name, str(bad))
        assert np.all(alloc.counts <= queue.counts), (i, regime, name)
    assert time.perf_counter() - t0 <= 120.0


def test_knapsack_matches_enumeration():
    """1,000 bounded-knapsack instances against full enumeration."""
    gen = np.random.default_rng(200)
    t0 = time.perf_counter()
    for _ in range(1_000):
        while True:
            n = int(gen.integers(1, 13))
            bounds = gen.integers(1, 5, n)
            if float(np.prod(bounds + 1.0)) <= 20_000:
                break
        weights = gen.integers(1, 13, n)
        values = gen.integers(0, 21, n).astype(np.float64)
        cap = int(gen.integers(0, 41))
        got, picks = knapsack_agent(values, weights, bounds, cap)
        grids = np.meshgrid(*(np.arange(b + 1) for b in bounds), indexing="ij")
        combos = np.stack([g.ravel() for g in grids], axis=1)
        feasible = combos @ weights <= cap
        want = float(np.max(combos[feasible] @ values))
        assert got == want
        picks = np.asarray(picks)
        assert float(picks @ values) == got
        assert int(picks @ weights) <= cap and np.all(picks <= bounds)
    assert time.perf_counter() - t0 <= 10.0


def test_exact_and_lp_if_against_brute_force():
    """200 (inflexible agents, flexible steps) instances: the exact policy
    matches a nested scan, and the LP rounding stays within one unit of
    weight per step type below it."""
    gen = np.random.default_rng(300)
    exact = make_policy("centralized-exact", "IF")
    lp = make_policy("lp-if", "IF")
    t0 = time.perf_counter()
    for i in range(200):
        sys = draw_bounded(gen, "IF", max_steps=5)
        queue = random_queue(gen, sys, hi=4)
        u = gen.integers(0, 3, sys.num_agent_types)
        w = np.maximum(backpressure_weights(queue.counts, sys), 0.0)
        a_exact = exact.allocate(ctx_for(sys, queue, u), sys)
        v_exact = float(a_exact.counts @ w)
        want = brute_best_weighted(sys, u, queue.counts.copy())
        assert v_exact == pytest.approx(want, abs=1e-9), i
        a_lp = lp.allocate(ctx_for(sys, queue, u), sys)
        assert check_allocation(sys, Availability(u=u), a_lp) is None
        v_lp = float(a_lp.counts @ w)
        assert v_exact - float(w.sum()) - 1e-9 <= v_lp <= v_exact + 1e-9, i
    assert time.perf_counter() - t0 <= 60.0


def test_boundary_ray_on_t1_via_cli(tmp_path, capsys):
    cfg = tmp_path / "t1.json"
    cfg.write_text(json.dumps(t1_doc()))
    assert main(["capacity", "--config", str(cfg), "--ray", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["boundary"] == pytest.approx(2.0, abs=1e-6)


def _partitioned_fi_doc(gen: np.random.Generator) -> dict:
    """Whole steps on flexible agents, shaped so the closed-form bound
    applies: specialist agents and one common step size."""
    num_skills = int(gen.integers(1, 3))
    size = float(gen.uniform(0.3, 0.9))
    agent_types = [
        {"skills": [s], "hours": float(gen.uniform(0.5, 2.0))}
        for s in range(num_skills)
    ]
    task_types = []
    for _ in range(int(gen.integers(1, 3))):
        n_steps = int(gen.integers(1, 3))
        parents = [-1] + [int(gen.integers(0, i)) for i in range(1, n_steps)]
        steps = [
            {str(int(gen.integers(0, num_skills))): size} for _ in range(n_steps)
        ]
        task_types.append({"steps": steps, "parents": parents, "rate": 1.0})
    return {
        "skills": num_skills,
        "regime": "FI",
        "agent_types": agent_types,
        "task_types": task_types,
    }


def _bounded_doc(gen: np.random.Generator, regime: str) -> dict:
    while True:
        doc = random_doc(gen, regime)
        sys = validate_config(doc)
        if sys.num_steps <= 3 and sys.num_agent_types <= 2:
            return doc


def test_outer_bound_accepts_member_inside_verdicts():
    """Mean-supply bounds are necessary conditions: every rate vector the
    membership LP certifies as inside must also pass them. 500 draws."""
    gen = np.random.default_rng(400)
    inside_seen = 0
    for i in range(500):
        regime = ("IF", "FF", "FI", "II")[i % 4]
        doc = _partitioned_fi_doc(gen) if regime == "FI" else _bounded_doc(gen, regime)
        for spec in doc["agent_types"]:
            kind = int(gen.integers(0, 3))
            if kind == 0:
                spec["availability"] = {
                    "kind": "deterministic",
                    "value": int(gen.integers(1, 3)),
                }
            elif kind == 1:
                spec["availability"] = {
                    "kind": "bernoulli",
                    "n": 2,
                    "p": float(gen.uniform(0.3, 0.9)),
                }
        sys, bundle = build(doc)
        gamma = gamma_from_specs(bundle.availability)
        mu = np.array([sp.rate() for sp in bundle.availability])
        lam = gen.uniform(0.02, 0.6, len(sys.task_types))
        report = capacity_member(sys, gamma, lam)
        if report.verdict == "inside":
            inside_seen += 1
            outer = outer_bound_check(sys, lam, mu)
            assert outer.passed, (i, regime, report.margin, outer.details)
    assert inside_seen >= 150, inside_seen


def _case(skills: int, regime: str, agents: list, tasks: list):
    return build(
        {"skills": skills, "regime": regime, "agent_types": agents, "task_types": tasks}
    )


# Small instances whose boundary the membership oracle can locate quickly.
# Single-step task types keep the overloaded drift at (alpha - 1) / alpha of
# the arrival volume, comfortably past the unstable verdict line; rates are
# chosen so every task type binds at the boundary simultaneously.
DICHOTOMY_CASES = {
    "IF": [
        _case(1, "IF", [{"skills": [0], "hours": {"0": 1.0}}],
              [{"steps": [{"0": 0.7}], "rate": 1.0}]),
        _case(2, "IF",
              [{"skills": [0], "hours": {"0": 1.0}}, {"skills": [1], "hours": {"1": 1.0}}],
              [{"steps": [{"0": 0.4, "1": 0.4}], "rate": 1.0}]),
        _case(2, "IF",
              [{"skills": [0], "hours": {"0": 1.0}}, {"skills": [1], "hours": {"1": 1.0}}],
              [{"steps": [{"0": 1.0}], "rate": 1.0}, {"steps": [{"1": 0.5}], "rate": 2.0}]),
        _case(1, "IF",
              [{"skills": [0], "hours": {"0": 2.0},
                "availability": {"kind": "bernoulli", "n": 2, "p": 0.5}}],
              [{"steps": [{"0": 0.8}], "rate": 1.0}]),
        _case(2, "IF", [{"skills": [0, 1], "hours": {"0": 1.0, "1": 0.5}}],
              [{"steps": [{"0": 0.5}], "rate": 2.0}, {"steps": [{"1": 0.25}], "rate": 2.0}]),
    ],
    "FF": [
        _case(1, "FF", [{"skills": [0], "hours": 1.0}],
              [{"steps": [{"0": 0.6}], "rate": 1.0}]),
        _case(2, "FF", [{"skills": [0, 1], "hours": 1.0}],
              [{"steps": [{"0": 0.3, "1": 0.2}], "rate": 1.0}]),
        _case(2, "FF", [{"skills": [0], "hours": 1.0}, {"skills": [0, 1], "hours": 1.0}],
              [{"steps": [{"0": 0.25, "1": 0.25}], "rate": 1.0}]),
        _case(2, "FF",
              [{"skills": [0, 1], "hours": 1.0,
                "availability": {"kind": "bernoulli", "n": 2, "p": 0.5}}],
              [{"steps": [{"0": 0.5, "1": 0.5}], "rate": 0.5}]),
        _case(2, "FF", [{"skills": [0], "hours": 0.5}, {"skills": [1], "hours": 1.5}],
              [{"steps": [{"0": 0.25}], "rate": 2.0}, {"steps": [{"1": 0.5}], "rate": 3.0}]),
    ],
    "FI": [
        _case(1, "FI", [{"skills": [0], "hours": 1.0}],
              [{"steps": [{"0": 0.5}], "rate": 1.0}]),
        _case(1, "FI", [{"skills": [0], "hours": 1.0}],
              [{"steps": [{"0": 0.34}], "rate": 1.0}]),
        _case(1, "FI", [{"skills": [0], "hours": 1.0}],
              [{"steps": [{"0": 0.6}], "rate": 1.0}, {"steps": [{"0": 0.4}], "rate": 1.0}]),
        _case(1, "FI",
              [{"skills": [0], "hours": 1.0,
                "availability": {"kind": "bernoulli", "n": 2, "p": 0.5}}],
              [{"steps": [{"0": 0.5}], "rate": 1.0}]),
        _case(2, "FI", [{"skills": [0, 1], "hours": 1.0}, {"skills": [1], "hours": 0.5}],
              [{"steps": [{"0": 0.5}], "rate": 1.0}, {"steps": [{"1": 0.5}], "rate": 1.0}]),
    ],
    "II": [
        _case(1, "II", [{"skills": [0], "hours": {"0": 1.0}}],
              [{"steps": [{"0": 0.5}], "rate": 1.0}]),
        _case(2, "II",
              [{"skills": [0], "hours": {"0": 1.0}}, {"skills": [1], "hours": {"1": 1.0}}],
              [{"steps": [{"0": 0.5}], "rate": 1.0}, {"steps": [{"1": 0.5}], "rate": 1.0}]),
        _case(2, "II", [{"skills": [0, 1], "hours": {"0": 0.6, "1": 0.6}}],
              [{"steps": [{"0": 0.3, "1": 0.3}], "rate": 1.0}]),
        _case(1, "II",
              [{"skills": [0], "hours": {"0": 1.0},
                "availability": {"kind": "bernoulli", "n": 2, "p": 0.5}}],
              [{"steps": [{"0": 0.5}], "rate": 1.0}]),
        _case(2, "II",
              [{"skills": [0], "hours": {"0": 1.0}}, {"skills": [1], "hours": {"1": 0.5}}],
              [{"steps": [{"0": 0.25}], "rate": 4.0}, {"steps": [{"1": 0.25}], "rate": 2.0}]),
    ],
}

DICHOTOMY_POLICIES = {
    "IF": ["centralized-exact", "lp-if"],
    "FF": ["centralized-exact", "lp-ff"],
    "FI": ["centralized-exact", "fi-decomposition"],
    "II": ["centralized-exact"],
}


def test_stability_dichotomy_centralized():
    """Centralized policies are stable at 0.8 of the boundary and unstable
    at 1.2, on every instance, policy and seed."""
    t0 = time.perf_counter()
    bad = []
    for regime, cases in DICHOTOMY_CASES.items():
        for ci, (sysv, bundle) in enumerate(cases):
            rates = np.array([tt.arrival_rate for tt in sysv.task_types])
            bscale = boundary_scalar(
                sysv, gamma_from_specs(bundle.availability), rates
            )
            for alpha, want in ((0.8, "stable"), (1.2, "unstable")):
                scaled = bundle.scaled_arrivals(alpha * bscale)
                for name in DICHOTOMY_POLICIES[regime]:
                    for seed in range(5):
                        rep = run(
                            sysv,
                            make_policy(name, regime),
                            scaled,
                            horizon=20_000,
                            seed=seed,
                        )
                        got = rep.summary()["stability"]
                        if got != want:
                            bad.append((regime, ci, name, alpha, seed, got))
    assert not bad, bad
    assert time.perf_counter() - t0 <= 600.0


def _scaling_if_doc(n: int) -> dict:
    return {
        "skills": 2,
        "regime": "IF",
        "agent_types": [
            {"skills": [0], "hours": {"0": 1.0},
             "availability": {"kind": "deterministic", "value": n // 2}},
            {"skills": [1], "hours": {"1": 1.0},
             "availability": {"kind": "deterministic", "value": n // 2}},
        ],
        "task_types": [
            {"steps": [{"0": 0.5}, {"1": 0.5}], "parents": [-1, 0], "rate": 0.8 * n}
        ],
    }


def _scaling_ff_doc(n: int) -> dict:
    return {
        "skills": 2,
        "regime": "FF",
        "agent_types": [
            {"skills": [0, 1], "hours": 1.0,
             "availability": {"kind": "deterministic", "value": n}}
        ],
        "task_types": [
            {"steps": [{"0": 0.5}], "rate": 0.8 * n},
            {"steps": [{"1": 0.5}], "rate": 0.8 * n},
        ],
    }


def _scaling_fi_doc(n: int) -> dict:
    # partitioned skills and one common step size
    return {
        "skills": 2,
        "regime": "FI",
        "agent_types": [
            {"skills": [0], "hours": 1.0,
             "availability": {"kind": "deterministic", "value": n // 2}},
            {"skills": [1], "hours": 1.0,
             "availability": {"kind": "deterministic", "value": n // 2}},
        ],
        "task_types": [
            {"steps": [{"0": 0.5}], "rate": 0.8 * n},
            {"steps": [{"1": 0.5}], "rate": 0.8 * n},
        ],
    }


class _LeftoverProbe:
    """Record the queue left unallocated each epoch. The engine's backlog
    series is sampled after arrivals land, so it carries a Theta(N) fresh
    term by construction; the leftover after allocation is the quantity
    whose scaling the greedy policies are supposed to control."""

    def __init__(self, inner):
        self.inner = inner
        self.leftover: list[int] = []

    def allocate(self, ctx, sys):
        alloc = self.inner.allocate(ctx, sys)
        self.leftover.append(int(ctx.queue.total()) - int(alloc.counts.sum()))
        return alloc


@pytest.mark.parametrize(
    "regime,mk,pol_name,ray",
    [
        ("IF", _scaling_if_doc, "prioritized-greedy", (1.0,)),
        ("FF", _scaling_ff_doc, "flex-greedy", (1.0, 1.0)),
        ("FI", _scaling_fi_doc, "restricted-greedy", (1.0, 1.0)),
    ],
    ids=["prioritized-greedy", "flex-greedy", "restricted-greedy"],
)
def test_greedy_leftover_sublinear_in_crowd_size(regime, mk, pol_name, ray):
    """Fix the load at 0.8 of the boundary and grow the crowd: the mean
    post-allocation leftover must grow sublinearly (80 vs 10 agents stays
    under the 8/2 linear ratio)."""
    sysv, bundle = build(mk(10))
    bscale = boundary_scalar(
        sysv, gamma_from_specs(bundle.availability), np.asarray(ray, float)
    )
    assert bscale == pytest.approx(10.0, abs=1e-6)
    means = {}
    for n in (10, 20, 40, 80):
        sysv, bundle = build(mk(n))
        vals = []
        for seed in range(3):
            probe = _LeftoverProbe(make_policy(pol_name, regime))
            run(sysv, probe, bundle, horizon=2000, seed=seed)
            tail = probe.leftover[len(probe.leftover) // 2 :]
            vals.append(float(np.mean(tail)))
        means[n] = float(np.mean(vals))
    assert means[10] > 0, means
    assert means[80] / means[10] < 4.0, means


def _trace_summary(kind: str, load: float, days: int, policy: str, epoch: float) -> dict:
    workload = gen_synthetic(kind, load, days, seed=0)
    sysv, bundle, horizon = compile_workload(
        workload, WorkerPoolSpec(count=50), epoch_seconds=epoch, grid_seconds=60.0
    )
    rep = run(
        sysv, make_policy(policy, "FF"), bundle,
        horizon=horizon, seed=0, epoch_seconds=epoch,
    )
    return rep.summary()


def test_trace_workload_policy_comparisons():
    """Fifty-worker synthetic workloads. Short steps: placing steps whole
    performs like splitting them. Long steps: splitting wins on mean TAT.
    And there is a load where whole-step placement is unstable while the
    splitting policy is stable, at comparable utilization."""
    t0 = time.perf_counter()

    s1 = _trace_summary("short", 25.0, 10, "algo1", 3600.0)
    s2 = _trace_summary("short", 25.0, 10, "algo2", 3600.0)
    assert abs(s1["tat"]["mean"] - s2["tat"]["mean"]) <= 0.10 * s2["tat"]["mean"]

    l1 = _trace_summary("long", 3.6, 10, "algo1", 7200.0)
    l2 = _trace_summary("long", 3.6, 10, "algo2", 7200.0)
    assert l1["tat"]["mean"] <= l2["tat"]["mean"] + 1e-9

    # 1080 s epochs make the longer multi-substep steps exceed one agent's
    # per-epoch budget: algo1 splits them across agents, algo3 can never
    # place them and its backlog grows without bound
    c1 = _trace_summary("short", 25.0, 25, "algo1", 1080.0)
    c3 = _trace_summary("short", 25.0, 25, "algo3", 1080.0)
    assert c1["stability"] == "stable", c1["normalized_backlog_slope"]
    assert c3["stability"] == "unstable", c3["normalized_backlog_slope"]
    assert abs(c1["mean_utilization"] - c3["mean_utilization"]) <= 0.20
    assert time.perf_counter() - t0 <= 1200.0


def test_cli_rerun_byte_identical(tmp_path):
    """Identical flags and seed produce byte-identical metrics files, for
    deterministic and sampled arrivals alike."""
    det = tmp_path / "det.json"
    det.write_text(json.dumps(t1_doc()))
    poisson_doc = t1_doc()
    poisson_doc["task_types"][0]["arrivals"] = {"kind": "poisson", "mean": 1.0}
    poi = tmp_path / "poi.json"
    poi.write_text(json.dumps(poisson_doc))
    for cfg in (det, poi):
        blobs = []
        for sub in ("one", "two"):
            out = tmp_path / f"{cfg.stem}-{sub}"
            code = main(
                [
                    "simulate",
                    "--config", str(cfg),
                    "--policy", "centralized-exact",
                    "--horizon", "200",
                    "--seed", "11",
                    "--out", str(out),
                ]
            )
            assert code == 0
            cell = out / "00_centralized-exact" / "load1" / "seed11"
            blobs.append((cell / "metrics.json").read_bytes())
        assert blobs[0] == blobs[1]
