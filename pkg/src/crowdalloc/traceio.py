"""Workload traces: CSV ingestion, synthetic generators, worker schedules,
and compilation of a trace into a typed system plus its driving processes.

Trace rows are one per (task, step, substep). Times are seconds; the engine
works in epoch fractions, so compilation divides durations by the epoch
length.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .model import (
    AgentTypeSpec,
    PrecedenceTree,
    Regime,
    TaskTypeSpec,
    ValidatedSystem,
)
from .processes import ProcessBundle, ProcessSpec

TRACE_HEADER = (
    "task_id",
    "project_id",
    "realtime",
    "arrival_sec",
    "step_index",
    "skill",
    "duration_sec",
    "strict_order",
)

DAY_SECONDS = 86_400.0


@dataclass
class TraceTask:
    task_id: str
    project_id: str
    realtime: bool
    arrival_sec: float
    # steps in order; each step is a list of (skill, duration seconds)
    steps: list[list[tuple[int, float]]]
    strict_order: bool


@dataclass
class TraceWorkload:
    tasks: list[TraceTask] = field(default_factory=list)

    def num_skills(self) -> int:
        top = -1
        for task in self.tasks:
            for step in task.steps:
                for skill, _d in step:
                    top = max(top, skill)
        return top + 1


def _fmt(x: float) -> str:
    """Canonical number form: integral values lose the decimal point."""
    f = float(x)
    if f.is_integer():
        return str(int(f))
    return repr(f)


def load_trace(path) -> TraceWorkload:
    """Read a trace CSV; errors carry the offending line number."""
    by_task: dict[str, dict] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_HEADER:
            raise ConfigError(
                f"trace header must be {','.join(TRACE_HEADER)}", str(path)
            )
        for lineno, row in enumerate(reader, start=2):
            where = f"{path}:{lineno}"
            if len(row) != len(TRACE_HEADER):
                raise ConfigError(
                    f"expected {len(TRACE_HEADER)} fields, got {len(row)}", where
                )
            tid, pid, realtime, arrival, step_idx, skill, duration, strict = row
            try:
                realtime_v = _parse_flag(realtime)
                strict_v = _parse_flag(strict)
                arrival_v = float(arrival)
                step_v = int(step_idx)
                skill_v = int(skill)
                duration_v = float(duration)
            except ValueError as exc:
                raise ConfigError(f"malformed row: {exc}", where) from None
            if duration_v <= 0:
                raise ConfigError("duration must be positive", where)
            if arrival_v < 0:
                raise ConfigError("arrival must be nonnegative", where)
            if step_v < 0 or skill_v < 0:
                raise ConfigError("step index and skill must be nonnegative", where)
            rec = by_task.setdefault(
                tid,
                {
                    "pid": pid,
                    "realtime": realtime_v,
                    "arrival": arrival_v,
                    "strict": strict_v,
                    "steps": {},
                    "line": lineno,
                },
            )
            if (
                rec["pid"] != pid
                or rec["realtime"] != realtime_v
                or rec["arrival"] != arrival_v
                or rec["strict"] != strict_v
            ):
                raise ConfigError(
                    f"task {tid!r} disagrees with its first row at line {rec['line']}",
                    where,
                )
            step = rec["steps"].setdefault(step_v, {})
            if skill_v in step:
                raise ConfigError(
                    f"duplicate (task, step, skill) = ({tid!r}, {step_v}, {skill_v})",
                    where,
                )
            step[skill_v] = duration_v

    tasks = []
    for tid, rec in by_task.items():
        steps = [
            sorted(rec["steps"][k].items()) for k in sorted(rec["steps"])
        ]
        tasks.append(
            TraceTask(
                task_id=tid,
                project_id=rec["pid"],
                realtime=rec["realtime"],
                arrival_sec=rec["arrival"],
                steps=steps,
                strict_order=rec["strict"],
            )
        )
    tasks.sort(key=lambda task: (task.arrival_sec, task.task_id))
    return TraceWorkload(tasks)


def _parse_flag(raw: str) -> bool:
    if raw == "0":
        return False
    if raw == "1":
        return True
    raise ValueError(f"flag must be 0 or 1, got {raw!r}")


def write_trace(workload: TraceWorkload, path) -> None:
    """Write the canonical CSV form; load_trace followed by write_trace
    reproduces a canonical file byte for byte."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for task in workload.tasks:
            for step_idx, step in enumerate(task.steps):
                for skill, duration in step:
                    writer.writerow(
                        (
                            task.task_id,
                            task.project_id,
                            int(task.realtime),
                            _fmt(task.arrival_sec),
                            step_idx,
                            skill,
                            _fmt(duration),
                            int(task.strict_order),
                        )
                    )


SYNTHETIC_KINDS = ("short", "long", "samahub")


def gen_synthetic(
    kind: str, load_tasks_per_hour: float, days: int, seed: int
) -> TraceWorkload:
    """Synthetic workloads:

    - short: 1..3 steps, 1..3 distinct skills out of 5 per step, substep
      durations uniform on [60, 600] seconds
    - long: same shape, durations uniform on [600, 6000]
    - samahub: 1..2 single-substep steps on one universal skill, durations
      uniform on [60, 620] (mean 340 seconds)
    """
    if kind not in SYNTHETIC_KINDS:
        raise ConfigError(f"kind must be one of {', '.join(SYNTHETIC_KINDS)}")
    if load_tasks_per_hour <= 0:
        raise ConfigError("load must be positive")
    if days < 1:
        raise ConfigError("days must be at least 1")
    gen = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    span = days * DAY_SECONDS
    count = int(gen.poisson(load_tasks_per_hour * 24.0 * days))
    arrivals = np.sort(gen.uniform(0.0, span, count))
    tasks = []
    width = max(6, len(str(max(count - 1, 1))))
    for i in range(count):
        if kind == "samahub":
            n_steps = int(gen.integers(1, 3))
            steps = [
                [(0, float(gen.uniform(60.0, 620.0)))] for _ in range(n_steps)
            ]
        else:
            lo, hi = (60.0, 600.0) if kind == "short" else (600.0, 6000.0)
            n_steps = int(gen.integers(1, 4))
            steps = []
            for _ in range(n_steps):
                n_sub = int(gen.integers(1, 4))
                skills = np.sort(gen.choice(5, size=n_sub, replace=False))
                steps.append(
                    [(int(s), float(gen.uniform(lo, hi))) for s in skills]
                )
        tasks.append(
            TraceTask(
                task_id=f"t{i:0{width}d}",
                project_id=kind,
                realtime=False,
                arrival_sec=float(arrivals[i]),
                steps=steps,
                strict_order=True,
            )
        )
    return TraceWorkload(tasks)


@dataclass(frozen=True)
class WorkerPoolSpec:
    """A crowd of identical-capability workers spread over time zones."""

    count: int
    offsets: tuple[float, ...] = (-4.0, 0.0, 3.0, 5.5)
    window: tuple[float, float] = (9.0, 17.0)
    skills: frozenset[int] | None = None  # None means every skill in play

    def __post_init__(self):
        if self.count < 0:
            raise ConfigError("worker count must be nonnegative")
        if not self.offsets:
            raise ConfigError("offsets must be nonempty")
        lo, hi = self.window
        if not (0.0 <= lo < hi <= 24.0):
            raise ConfigError("window must satisfy 0 <= start < end <= 24")


def pool_from_config(raw: dict, path: str = "workers") -> WorkerPoolSpec:
    if not isinstance(raw, dict) or "count" not in raw:
        raise ConfigError("worker pool needs at least a count", path)
    kwargs = {"count": int(raw["count"])}
    if "offsets" in raw:
        kwargs["offsets"] = tuple(float(o) for o in raw["offsets"])
    if "window" in raw:
        window = raw["window"]
        if not isinstance(window, (list, tuple)) or len(window) != 2:
            raise ConfigError("window must be [start, end] local hours", path)
        kwargs["window"] = (float(window[0]), float(window[1]))
    if "skills" in raw:
        kwargs["skills"] = frozenset(int(s) for s in raw["skills"])
    return WorkerPoolSpec(**kwargs)


def build_worker_schedule(
    pool: WorkerPoolSpec, epoch_seconds: float, horizon: int
) -> np.ndarray:
    """0/1 availability matrix (worker, epoch), epochs starting at t=1.

    Workers round-robin over the pool's offsets. An epoch counts as worked
    when the majority of it overlaps the worker's local daily window; the
    exact-half tie goes by the epoch midpoint, so an 8 hour window over 1
    hour epochs always yields 8 epochs regardless of fractional offsets.
    """
    if epoch_seconds <= 0 or (DAY_SECONDS % epoch_seconds) != 0.0:
        raise ConfigError("epoch length must divide 24 hours")
    lo, hi = pool.window
    out = np.zeros((pool.count, horizon), dtype=np.int64)
    for w in range(pool.count):
        offset = pool.offsets[w % len(pool.offsets)]
        for t in range(horizon):
            mid_local = ((t + 0.5) * epoch_seconds / 3600.0 + offset) % 24.0
            if lo <= mid_local < hi:
                out[w, t] = 1
    return out


def compile_workload(
    workload: TraceWorkload,
    pool: WorkerPoolSpec,
    regime: str = "FF",
    epoch_seconds: float = 3600.0,
    grid_seconds: float = 60.0,
    horizon: int | None = None,
    num_skills: int | None = None,
) -> tuple[ValidatedSystem, ProcessBundle, int]:
    """Group tasks into types and emit (system, processes, horizon).

    Tasks with the same step-shape after rounding durations to the grid
    become one type whose hours are the member mean, so total skill-hours
    are preserved exactly. Steps always chain in their listed order. Workers
    are modeled as one fully flexible agent type, so only regimes with
    flexible agents compile.
    """
    reg = Regime.from_code(regime)
    if not reg.agents_flexible:
        raise ConfigError(
            "trace workers are interchangeable; compile under FF or FI"
        )
    if grid_seconds <= 0:
        raise ConfigError("rounding grid must be positive")
    skills_seen = workload.num_skills()
    if num_skills is None:
        num_skills = max(skills_seen, 1)
    elif num_skills < skills_seen:
        raise ConfigError(f"trace uses skills up to {skills_seen - 1}")
    if horizon is None:
        last = max((task.arrival_sec for task in workload.tasks), default=0.0)
        horizon = max(1, int(math.ceil((last + 1.0) / epoch_seconds)))

    # type key: per-step sorted (skill, grid bucket); durations average later
    groups: dict[tuple, list[TraceTask]] = {}
    for task in workload.tasks:
        key = tuple(
            tuple((skill, round(duration / grid_seconds)) for skill, duration in step)
            for step in task.steps
        )
        groups.setdefault(key, []).append(task)

    task_types = []
    arrival_specs = []
    for key in sorted(groups):
        members = groups[key]
        kk = len(key)
        steps = np.zeros((kk, num_skills))
        for k, slot in enumerate(key):
            for j, (skill, _bucket) in enumerate(slot):
                total = sum(task.steps[k][j][1] for task in members)
                steps[k, skill] = total / len(members) / epoch_seconds
        parent = tuple(k - 1 for k in range(kk))
        counts = np.zeros(horizon, dtype=np.int64)
        for task in members:
            e = int(task.arrival_sec // epoch_seconds)
            if 0 <= e < horizon:
                counts[e] += 1
        task_types.append(
            TaskTypeSpec(
                steps=steps,
                tree=PrecedenceTree(parent),
                arrival_rate=len(members) / horizon,
            )
        )
        arrival_specs.append(
            ProcessSpec(kind="trace", values=tuple(int(c) for c in counts))
        )

    if not task_types:
        raise ConfigError("empty workload compiles to no task types")
    pool_skills = pool.skills if pool.skills is not None else frozenset(range(num_skills))
    # an available worker works the whole epoch, and hours are epoch fractions
    agent = AgentTypeSpec(skills=pool_skills, flexible_hours=1.0)
    system = ValidatedSystem(
        num_skills=num_skills,
        regime=reg,
        agent_types=(agent,),
        task_types=tuple(task_types),
    )
    schedule = build_worker_schedule(pool, epoch_seconds, horizon)
    avail = ProcessSpec(
        kind="trace", values=tuple(int(c) for c in schedule.sum(axis=0))
    )
    bundle = ProcessBundle(arrivals=tuple(arrival_specs), availability=(avail,))
    return system, bundle, horizon
