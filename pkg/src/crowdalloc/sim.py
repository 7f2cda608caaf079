"""Discrete-time engine: sample, allocate, check, advance.

Epoch t holds the steps that became allocatable by t (external roots plus
children released by epoch t-1 completions). The policy sees the queue and
the availability draw, returns an allocation, and every allocated step
finishes within the epoch, releasing its children for t+1.

Step instances depart FIFO per type: an allocation's instance ordinal i
always refers to the i-th oldest queued instance of that step type.
"""

from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .constraints import Allocation, Availability, check_allocation
from .errors import NoCompletions
from .model import ValidatedSystem
from .processes import ProcessBundle, Rng, presample

log = logging.getLogger(__name__)


class QueueState:
    """Per-step-type FIFO queues of (task uid, release epoch)."""

    def __init__(self, num_steps: int):
        self.counts = np.zeros(num_steps, dtype=np.int64)
        self.fifo: list[deque] = [deque() for _ in range(num_steps)]

    def push(self, idx: int, uid: int, release: int) -> None:
        self.counts[idx] += 1
        self.fifo[idx].append((uid, release))

    def release_epochs(self, idx: int) -> list[int]:
        return [rel for _, rel in self.fifo[idx]]

    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class PolicyContext:
    """Everything a policy may look at for one epoch."""

    t: int
    queue: QueueState
    avail: Availability
    arrivals: np.ndarray  # external task arrivals counted into this epoch
    rng_factory: Callable[[], np.random.Generator] = field(repr=False)
    _rng: np.random.Generator | None = field(default=None, init=False, repr=False)

    @property
    def rng(self) -> np.random.Generator:
        """Per-epoch tie-break stream, built on first touch so policies that
        never randomize skip the stream construction entirely."""
        if self._rng is None:
            self._rng = self.rng_factory()
        return self._rng


@dataclass
class _TaskRecord:
    uid: int
    task_type: int
    released: int
    steps_left: int


def stability_diagnostic(
    backlog: np.ndarray, arrival_volume: float = 1.0
) -> tuple[str, float]:
    """Least-squares backlog slope over the last half, normalized by the mean
    per-epoch arrival volume. < 0.01 reads stable, > 0.1 unstable, anything
    between is inconclusive."""
    traj = np.asarray(backlog, dtype=np.float64)
    if len(traj) < 4:
        return "inconclusive", 0.0
    half = traj[len(traj) // 2 :]
    x = np.arange(len(half), dtype=np.float64)
    x -= x.mean()
    denom = float(x @ x)
    slope = float(x @ (half - half.mean())) / denom if denom > 0 else 0.0
    norm = slope / max(arrival_volume, 1e-12)
    if norm < 0.01:
        return "stable", norm
    if norm > 0.1:
        return "unstable", norm
    return "inconclusive", norm


def tat_cdf(samples: list[int]) -> tuple[np.ndarray, np.ndarray]:
    """Empirical turnaround CDF: (sorted values, cumulative fraction)."""
    if not samples:
        raise NoCompletions("no task completed, turnaround CDF undefined")
    values = np.sort(np.asarray(samples, dtype=np.int64))
    uniq, counts = np.unique(values, return_counts=True)
    return uniq, np.cumsum(counts) / len(values)


@dataclass
class MetricsReport:
    """Run summary plus raw trajectories.

    to_json() is byte-deterministic for identical runs; trajectories are
    exported separately as CSV.
    """

    horizon: int
    seed: int
    epoch_seconds: float
    arrived_tasks: int
    completed_tasks: int
    tat_samples: list[int]
    backlog: list[int]
    utilization: list[float]
    allocated_hours: float
    offered_hours: float
    arrival_step_volume: float
    final_backlog: int = field(init=False)
    verdict: str = field(init=False)
    norm_slope: float = field(init=False)

    def __post_init__(self):
        self.final_backlog = self.backlog[-1] if self.backlog else 0
        self.verdict, self.norm_slope = stability_diagnostic(
            np.asarray(self.backlog), self.arrival_step_volume or 1.0
        )

    def summary(self) -> dict:
        tat = np.asarray(self.tat_samples, dtype=np.float64)
        out = {
            "horizon": self.horizon,
            "seed": self.seed,
            "epoch_seconds": self.epoch_seconds,
            "arrived_tasks": self.arrived_tasks,
            "completed_tasks": self.completed_tasks,
            "final_backlog": self.final_backlog,
            "mean_backlog_last_half": float(
                np.mean(self.backlog[len(self.backlog) // 2 :]) if self.backlog else 0.0
            ),
            "stability": self.verdict,
            "normalized_backlog_slope": self.norm_slope,
            "allocated_hours": self.allocated_hours,
            "offered_hours": self.offered_hours,
            "mean_utilization": float(np.mean(self.utilization)) if self.utilization else 0.0,
        }
        if len(tat):
            out["tat"] = {
                "count": int(len(tat)),
                "mean": float(tat.mean()),
                "p50": float(np.percentile(tat, 50)),
                "p90": float(np.percentile(tat, 90)),
                "p99": float(np.percentile(tat, 99)),
                "max": int(tat.max()),
            }
        else:
            out["tat"] = {"count": 0}
        return out

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, separators=(",", ":"))

    def write_trajectories(self, directory) -> None:
        from pathlib import Path

        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "backlog.csv", "w") as f:
            f.write("epoch,backlog\n")
            for t, q in enumerate(self.backlog, start=1):
                f.write(f"{t},{q}\n")
        with open(d / "utilization.csv", "w") as f:
            f.write("epoch,utilization\n")
            for t, v in enumerate(self.utilization, start=1):
                f.write(f"{t},{v!r}\n")
        with open(d / "tat.csv", "w") as f:
            f.write("tat_epochs\n")
            for v in self.tat_samples:
                f.write(f"{v}\n")


def _warn_unserviceable(sys: ValidatedSystem) -> None:
    if sys.regime.steps_flexible:
        return
    for idx in range(sys.num_steps):
        need = sys.step_skills[idx]
        if not any(need <= a.skills for a in sys.agent_types):
            log.warning(
                "step type %s requires skills %s that no single agent type covers; "
                "it can never be allocated under an inflexible-steps regime",
                sys.step_pairs[idx],
                sorted(need),
            )


def run(
    sys: ValidatedSystem,
    policy,
    bundle: ProcessBundle,
    horizon: int,
    seed: int,
    epoch_seconds: float = 3600.0,
    check: bool = False,
    log_stream=None,
) -> MetricsReport:
    """Simulate `horizon` epochs and collect metrics.

    check=True re-verifies every allocation against the constraint checker
    (slow path, intended for tests). log_stream, when given, receives one
    JSON line per arrival / step allocation / task completion.
    """
    _warn_unserviceable(sys)
    rng = Rng(seed)
    arrival_path = presample(bundle.arrivals, rng, "arrivals", horizon)
    avail_path = presample(bundle.availability, rng, "availability", horizon)
    queue = QueueState(sys.num_steps)
    tasks: dict[int, _TaskRecord] = {}
    next_uid = 0
    pending: list[tuple[int, int, int]] = []  # (idx, uid, release) for next epoch

    offered_per_type = np.array(
        [a.total_hours(sys.regime.agents_flexible) for a in sys.agent_types]
    )
    tree_sizes = np.array([tt.tree.num_steps for tt in sys.task_types], dtype=np.float64)
    rates = np.array([spec.rate() for spec in bundle.arrivals])
    arrival_step_volume = float(rates @ tree_sizes)

    backlog: list[int] = []
    utilization: list[float] = []
    tat_samples: list[int] = []
    arrived_tasks = 0
    completed = 0
    allocated_hours_total = 0.0
    offered_hours_total = 0.0

    for t in range(1, horizon + 1):
        for idx, uid, release in pending:
            queue.push(idx, uid, release)
        pending.clear()

        arrivals = arrival_path[t - 1]
        for j, n in enumerate(arrivals):
            root_idx = sys.offsets[j] + sys.task_types[j].tree.root
            for _ in range(int(n)):
                uid = next_uid
                next_uid += 1
                tasks[uid] = _TaskRecord(uid, j, t, sys.task_types[j].tree.num_steps)
                queue.push(root_idx, uid, t)
                if log_stream is not None:
                    log_stream.write(
                        json.dumps(
                            {"t": t, "ev": "arrival", "task": uid, "type": j},
                            sort_keys=True,
                            separators=(",", ":"),
                        )
                        + "\n"
                    )
        arrived_tasks += int(arrivals.sum())

        backlog.append(queue.total())

        u = avail_path[t - 1]
        avail = Availability(u=u)
        ctx = PolicyContext(
            t=t,
            queue=queue,
            avail=avail,
            arrivals=arrivals,
            rng_factory=lambda t=t: rng.stream("policy", t),
        )
        alloc: Allocation = policy.allocate(ctx, sys)

        if check:
            violation = check_allocation(sys, avail, alloc)
            if violation is not None:
                raise AssertionError(f"policy emitted a bad allocation at t={t}: {violation}")

        rows_by_step: dict[tuple[int, int], list] = {}
        epoch_hours = 0.0
        for a in alloc.assignments:
            rows_by_step.setdefault(a.step, []).append((a.agent, a.skill, a.hours))
            epoch_hours += a.hours
        allocated_hours_total += epoch_hours
        offered = float(offered_per_type @ u)
        offered_hours_total += offered
        utilization.append(epoch_hours / offered if offered > 0 else 0.0)

        for idx in np.nonzero(alloc.counts)[0]:
            idx = int(idx)
            d = min(int(alloc.counts[idx]), int(queue.counts[idx]))
            kids = sys.children_of(idx)
            for ordinal in range(d):
                uid, _released = queue.fifo[idx].popleft()
                queue.counts[idx] -= 1
                rec = tasks[uid]
                rec.steps_left -= 1
                if log_stream is not None:
                    j, k = sys.step_pairs[idx]
                    log_stream.write(
                        json.dumps(
                            {
                                "t": t,
                                "ev": "alloc",
                                "task": uid,
                                "step": [j, k],
                                "rows": rows_by_step.get((idx, ordinal), []),
                            },
                            sort_keys=True,
                            separators=(",", ":"),
                        )
                        + "\n"
                    )
                for cidx in kids:
                    pending.append((cidx, uid, t + 1))
                if rec.steps_left == 0:
                    tat = t - rec.released + 1
                    tat_samples.append(tat)
                    completed += 1
                    del tasks[uid]
                    if log_stream is not None:
                        log_stream.write(
                            json.dumps(
                                {"t": t, "ev": "done", "task": uid, "tat": tat},
                                sort_keys=True,
                                separators=(",", ":"),
                            )
                            + "\n"
                        )

    return MetricsReport(
        horizon=horizon,
        seed=seed,
        epoch_seconds=epoch_seconds,
        arrived_tasks=arrived_tasks,
        completed_tasks=completed,
        tat_samples=tat_samples,
        backlog=backlog,
        utilization=utilization,
        allocated_hours=allocated_hours_total,
        offered_hours=offered_hours_total,
        arrival_step_volume=arrival_step_volume,
    )
