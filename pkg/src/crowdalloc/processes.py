"""Stochastic inputs: arrival and availability processes.

All randomness flows through Rng, a factory of independent Philox substreams
keyed by (seed, label, *ints). Keyed substreams make every draw reproducible
regardless of call order, and keep arrivals, availability and policy
tie-breaking independent of each other by construction.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import ConfigError
from .model import ValidatedSystem


def _label_key(label: str) -> int:
    digest = hashlib.sha256(label.encode()).digest()
    return int.from_bytes(digest[:8], "little")


class Rng:
    """Deterministic stream factory, splittable by a string label plus
    integer keys (epoch, entity index, ...)."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def stream(self, label: str, *keys: int) -> np.random.Generator:
        ss = np.random.SeedSequence([self.seed, _label_key(label), *[int(k) for k in keys]])
        return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class ProcessSpec:
    """Per-epoch count process. Kinds:

    - poisson: mean per epoch
    - bernoulli: batch of n trials with success probability p
    - deterministic: fixed integer count
    - trace: explicit per-epoch counts, cycled past the end
    """

    kind: str
    mean: float = 0.0
    n: int = 0
    p: float = 0.0
    value: int = 0
    values: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("poisson", "bernoulli", "deterministic", "trace"):
            raise ConfigError(f"unknown process kind {self.kind!r}")
        if self.kind == "poisson" and self.mean < 0:
            raise ConfigError("poisson mean must be nonnegative")
        if self.kind == "bernoulli" and not (self.n >= 0 and 0 <= self.p <= 1):
            raise ConfigError("bernoulli needs n >= 0 and p in [0, 1]")
        if self.kind == "deterministic" and self.value < 0:
            raise ConfigError("deterministic count must be nonnegative")
        if self.kind == "trace" and (not self.values or any(v < 0 for v in self.values)):
            raise ConfigError("trace needs nonnegative per-epoch counts")

    def rate(self) -> float:
        """Mean count per epoch."""
        if self.kind == "poisson":
            return self.mean
        if self.kind == "bernoulli":
            return self.n * self.p
        if self.kind == "deterministic":
            return float(self.value)
        return float(np.mean(self.values))

    def sample_path(self, gen: np.random.Generator, horizon: int) -> np.ndarray:
        """Counts for epochs 1..horizon as one vectorized draw."""
        if self.kind == "poisson":
            return gen.poisson(self.mean, horizon).astype(np.int64)
        if self.kind == "bernoulli":
            return gen.binomial(self.n, self.p, horizon).astype(np.int64)
        if self.kind == "deterministic":
            return np.full(horizon, self.value, dtype=np.int64)
        reps = -(-horizon // len(self.values))  # trace cycles past its end
        return np.tile(np.asarray(self.values, dtype=np.int64), reps)[:horizon]

    def scaled(self, factor: float) -> "ProcessSpec":
        """Rescale the mean rate; only meaningful for poisson."""
        if self.kind != "poisson":
            raise ConfigError(f"cannot rescale a {self.kind} process")
        return ProcessSpec(kind="poisson", mean=self.mean * factor)

    def support(self) -> list[tuple[int, float]]:
        """Finite support as (count, probability) pairs; poisson and trace
        kinds have none and must be finitized by the caller."""
        if self.kind == "deterministic":
            return [(self.value, 1.0)]
        if self.kind == "bernoulli":
            return [
                (k, comb(self.n, k) * self.p**k * (1 - self.p) ** (self.n - k))
                for k in range(self.n + 1)
            ]
        raise ConfigError(f"{self.kind} process has no finite support table")


def spec_from_config(raw, default_rate: float | None = None, path: str = "") -> ProcessSpec:
    """Parse an embedded process entry; a bare number means poisson."""
    if raw is None:
        if default_rate is None:
            raise ConfigError("missing process spec", path)
        return ProcessSpec(kind="poisson", mean=default_rate)
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return ProcessSpec(kind="poisson", mean=float(raw))
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError("process spec must be a number or a {kind: ...} map", path)
    kind = raw["kind"]
    try:
        if kind == "poisson":
            return ProcessSpec(kind=kind, mean=float(raw["mean"]))
        if kind == "bernoulli":
            return ProcessSpec(kind=kind, n=int(raw["n"]), p=float(raw["p"]))
        if kind == "deterministic":
            return ProcessSpec(kind=kind, value=int(raw["value"]))
        if kind == "trace":
            return ProcessSpec(kind=kind, values=tuple(int(v) for v in raw["values"]))
    except KeyError as exc:
        raise ConfigError(f"process spec missing field {exc}", path) from None
    raise ConfigError(f"unknown process kind {kind!r}", path)


@dataclass
class ProcessBundle:
    """Arrival specs per task type and availability specs per agent type."""

    arrivals: tuple[ProcessSpec, ...]
    availability: tuple[ProcessSpec, ...]

    def scaled_arrivals(self, factor: float) -> "ProcessBundle":
        return ProcessBundle(
            arrivals=tuple(a.scaled(factor) for a in self.arrivals),
            availability=self.availability,
        )


def bundle_from_config(doc: dict, sys: ValidatedSystem) -> ProcessBundle:
    """Pull the process specs embedded in a config document.

    Task arrivals default to poisson at the task's rate; agent availability
    defaults to deterministic count 1.
    """
    arrivals = []
    for j, rt in enumerate(doc.get("task_types", [])):
        arrivals.append(
            spec_from_config(
                rt.get("arrivals"),
                default_rate=sys.task_types[j].arrival_rate,
                path=f"task_types[{j}].arrivals",
            )
        )
    avail = []
    for m, ra in enumerate(doc.get("agent_types", [])):
        raw = ra.get("availability")
        if raw is None:
            avail.append(ProcessSpec(kind="deterministic", value=1))
        else:
            avail.append(spec_from_config(raw, path=f"agent_types[{m}].availability"))
    return ProcessBundle(arrivals=tuple(arrivals), availability=tuple(avail))


def presample(
    specs: tuple[ProcessSpec, ...], rng: Rng, label: str, horizon: int
) -> np.ndarray:
    """(horizon, len(specs)) count matrix; row t-1 belongs to epoch t.

    Each spec draws from its own keyed substream, so adding or reordering
    other processes never perturbs an existing one.
    """
    out = np.zeros((horizon, len(specs)), dtype=np.int64)
    for i, spec in enumerate(specs):
        out[:, i] = spec.sample_path(rng.stream(label, i), horizon)
    return out


@dataclass(frozen=True)
class GammaTable:
    """Finite availability distribution: (count vector, probability) rows."""

    points: tuple[tuple[int, ...], ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if not self.points or len(self.points) != len(self.probs):
            raise ConfigError("availability table needs matching points and probabilities")
        if any(p < 0 for p in self.probs) or abs(sum(self.probs) - 1.0) > 1e-9:
            raise ConfigError("availability probabilities must be nonnegative and sum to 1")


def gamma_from_specs(specs: tuple[ProcessSpec, ...], prob_floor: float = 1e-12) -> GammaTable:
    """Product table over independent finite availability processes.

    Rows below prob_floor are dropped and the mass renormalized.
    """
    points: list[tuple[int, ...]] = [()]
    probs: list[float] = [1.0]
    for spec in specs:
        sup = spec.support()
        points = [pt + (k,) for pt in points for k, _ in sup]
        probs = [pr * q for pr in probs for _, q in sup]
    kept = [(pt, pr) for pt, pr in zip(points, probs) if pr > prob_floor]
    total = sum(pr for _, pr in kept)
    return GammaTable(
        points=tuple(pt for pt, _ in kept),
        probs=tuple(pr / total for _, pr in kept),
    )
