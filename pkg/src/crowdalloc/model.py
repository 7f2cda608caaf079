"""Static problem data: skills, agent types, task types, precedence trees.

A system couples a finite skill universe with agent types (skill sets plus
hour budgets) and task types (steps with per-skill hour requirements arranged
in a rooted precedence tree). The regime fixes two independent switches:
whether an agent's budget is fungible across its skills, and whether a step
may be split across agents.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

REGIME_CODES = ("IF", "FF", "FI", "II")


@dataclass(frozen=True)
class Regime:
    """(agents, steps) flexibility pair, e.g. code "FI" = flexible agents,
    inflexible steps."""

    agents_flexible: bool
    steps_flexible: bool

    @staticmethod
    def from_code(code: str) -> "Regime":
        if code not in REGIME_CODES:
            raise ConfigError(f"unknown regime {code!r}, expected one of {REGIME_CODES}", "regime")
        return Regime(code[0] == "F", code[1] == "F")

    @property
    def code(self) -> str:
        return ("F" if self.agents_flexible else "I") + ("F" if self.steps_flexible else "I")


@dataclass(frozen=True)
class AgentTypeSpec:
    """One agent type. Exactly one of the hour fields is active:
    flexible_hours when the regime has flexible agents, inflexible_hours
    (length-S per-skill budgets, zero off the skill set) otherwise."""

    skills: frozenset[int]
    flexible_hours: float = 0.0
    inflexible_hours: tuple[float, ...] = ()

    def hours_vector(self, num_skills: int, agents_flexible: bool) -> np.ndarray:
        """Per-skill budget view; a flexible agent offers its whole budget on
        every skill it has."""
        h = np.zeros(num_skills)
        if agents_flexible:
            for s in self.skills:
                h[s] = self.flexible_hours
        else:
            h[:] = self.inflexible_hours
        return h

    def total_hours(self, agents_flexible: bool) -> float:
        if agents_flexible:
            return self.flexible_hours
        return float(sum(self.inflexible_hours))


@dataclass(frozen=True)
class PrecedenceTree:
    """Rooted tree over step indices 0..K-1, parent[root] = -1.

    children/depth/leaf_count are derived caches: depth is 1 at the root,
    leaf_count[k] counts leaves of the subtree rooted at k.
    """

    parent: tuple[int, ...]
    children: tuple[tuple[int, ...], ...] = field(init=False)
    depth: tuple[int, ...] = field(init=False)
    leaf_count: tuple[int, ...] = field(init=False)
    root: int = field(init=False)

    def __post_init__(self):
        k = len(self.parent)
        if k == 0:
            raise ConfigError("tree must have at least one step", "parents")
        roots = [i for i, p in enumerate(self.parent) if p == -1]
        if len(roots) != 1:
            raise ConfigError(f"tree must have exactly one root, found {len(roots)}", "parents")
        root = roots[0]
        kids: list[list[int]] = [[] for _ in range(k)]
        for i, p in enumerate(self.parent):
            if p == -1:
                continue
            if not 0 <= p < k:
                raise ConfigError(f"parent index {p} of step {i} out of range", "parents")
            if p == i:
                raise ConfigError(f"step {i} is its own parent", "parents")
            kids[p].append(i)
        depth = [0] * k
        order = [root]
        depth[root] = 1
        for node in order:
            for c in kids[node]:
                depth[c] = depth[node] + 1
                order.append(c)
        if len(order) != k:
            raise ConfigError("tree contains a cycle or unreachable step", "parents")
        leaves = [0] * k
        for node in reversed(order):
            cs = kids[node]
            leaves[node] = 1 if not cs else sum(leaves[c] for c in cs)
        object.__setattr__(self, "children", tuple(tuple(c) for c in kids))
        object.__setattr__(self, "depth", tuple(depth))
        object.__setattr__(self, "leaf_count", tuple(leaves))
        object.__setattr__(self, "root", root)

    @property
    def num_steps(self) -> int:
        return len(self.parent)

    @property
    def max_depth(self) -> int:
        return max(self.depth)


@dataclass(frozen=True)
class TaskTypeSpec:
    """One task type: per-step skill-hour requirements (K x S, rows nonzero),
    the precedence tree over those steps, and a mean arrival rate per epoch."""

    steps: np.ndarray
    tree: PrecedenceTree
    arrival_rate: float

    def __eq__(self, other):
        if not isinstance(other, TaskTypeSpec):
            return NotImplemented
        return (
            np.array_equal(self.steps, other.steps)
            and self.tree == other.tree
            and self.arrival_rate == other.arrival_rate
        )


@dataclass(frozen=True)
class ValidatedSystem:
    """A checked system plus derived index caches.

    Steps of all task types are flattened into one global index, task-major
    with in-task step order preserved; most engine code works in that index.
    """

    num_skills: int
    regime: Regime
    agent_types: tuple[AgentTypeSpec, ...]
    task_types: tuple[TaskTypeSpec, ...]

    # derived, task-major flattening of all (task, step) pairs
    step_pairs: tuple[tuple[int, int], ...] = field(init=False)
    offsets: tuple[int, ...] = field(init=False)
    r_matrix: np.ndarray = field(init=False)
    step_skills: tuple[frozenset[int], ...] = field(init=False)
    step_total: np.ndarray = field(init=False)
    step_depth: np.ndarray = field(init=False)
    max_depth: int = field(init=False)
    # flattened (parent, child, child leaf count) edge arrays
    edge_parent: np.ndarray = field(init=False)
    edge_child: np.ndarray = field(init=False)
    edge_leaves: np.ndarray = field(init=False)

    def __post_init__(self):
        pairs = []
        offsets = []
        off = 0
        for j, tt in enumerate(self.task_types):
            offsets.append(off)
            for k in range(tt.tree.num_steps):
                pairs.append((j, k))
            off += tt.tree.num_steps
        r = np.zeros((len(pairs), self.num_skills))
        depth = np.zeros(len(pairs), dtype=np.int64)
        skills = []
        for idx, (j, k) in enumerate(pairs):
            r[idx] = self.task_types[j].steps[k]
            depth[idx] = self.task_types[j].tree.depth[k]
            skills.append(frozenset(int(s) for s in np.nonzero(r[idx])[0]))
        ep, ec, el = [], [], []
        for idx, (j, k) in enumerate(pairs):
            tree = self.task_types[j].tree
            for c in tree.children[k]:
                ep.append(idx)
                ec.append(offsets[j] + c)
                el.append(tree.leaf_count[c])
        object.__setattr__(self, "step_pairs", tuple(pairs))
        object.__setattr__(self, "offsets", tuple(offsets))
        object.__setattr__(self, "r_matrix", r)
        object.__setattr__(self, "step_skills", tuple(skills))
        object.__setattr__(self, "step_total", r.sum(axis=1))
        object.__setattr__(self, "step_depth", depth)
        object.__setattr__(self, "max_depth", int(depth.max()) if len(pairs) else 0)
        object.__setattr__(self, "edge_parent", np.array(ep, dtype=np.int64))
        object.__setattr__(self, "edge_child", np.array(ec, dtype=np.int64))
        object.__setattr__(self, "edge_leaves", np.array(el, dtype=np.float64))

    def __eq__(self, other):
        if not isinstance(other, ValidatedSystem):
            return NotImplemented
        return (
            self.num_skills == other.num_skills
            and self.regime == other.regime
            and self.agent_types == other.agent_types
            and self.task_types == other.task_types
        )

    @property
    def num_steps(self) -> int:
        return len(self.step_pairs)

    @property
    def num_agent_types(self) -> int:
        return len(self.agent_types)

    @property
    def num_task_types(self) -> int:
        return len(self.task_types)

    def jk(self, j: int, k: int) -> int:
        return self.offsets[j] + k

    def children_of(self, idx: int) -> tuple[int, ...]:
        j, k = self.step_pairs[idx]
        return tuple(self.offsets[j] + c for c in self.task_types[j].tree.children[k])

    def hours_matrix(self) -> np.ndarray:
        """(M x S) per-skill budgets of one agent of each type."""
        return np.array(
            [a.hours_vector(self.num_skills, self.regime.agents_flexible) for a in self.agent_types]
        )

    def to_config(self) -> dict:
        """Emit a config document that re-validates to an equal system."""
        agents = []
        for a in self.agent_types:
            if self.regime.agents_flexible:
                hours: object = a.flexible_hours
            else:
                hours = {str(s): a.inflexible_hours[s] for s in sorted(a.skills)}
            agents.append({"skills": sorted(a.skills), "hours": hours})
        tasks = []
        for tt in self.task_types:
            steps = []
            for k in range(tt.tree.num_steps):
                row = tt.steps[k]
                steps.append({str(s): float(row[s]) for s in np.nonzero(row)[0]})
            tasks.append(
                {
                    "steps": steps,
                    "parents": list(tt.tree.parent),
                    "rate": tt.arrival_rate,
                }
            )
        return {
            "skills": self.num_skills,
            "regime": self.regime.code,
            "agent_types": agents,
            "task_types": tasks,
        }


def depth_classes(sys: ValidatedSystem) -> list[list[int]]:
    """Global step indices grouped by tree depth, class d holds depth d+1."""
    classes: list[list[int]] = [[] for _ in range(sys.max_depth)]
    for idx in range(sys.num_steps):
        classes[sys.step_depth[idx] - 1].append(idx)
    return classes


def _parse_skills(raw, num_skills: int, path: str) -> frozenset[int]:
    if not isinstance(raw, (list, tuple)) or not raw:
        raise ConfigError("skills must be a nonempty list", path)
    out = set()
    for s in raw:
        if not isinstance(s, int) or isinstance(s, bool) or not 0 <= s < num_skills:
            raise ConfigError(f"skill {s!r} out of range [0, {num_skills})", path)
        out.add(s)
    return frozenset(out)


def _parse_hour_map(raw, num_skills: int, path: str) -> dict[int, float]:
    if not isinstance(raw, dict) or not raw:
        raise ConfigError("expected a nonempty {skill: hours} map", path)
    out = {}
    for key, val in raw.items():
        try:
            s = int(key)
        except (TypeError, ValueError):
            raise ConfigError(f"bad skill key {key!r}", path) from None
        if not 0 <= s < num_skills:
            raise ConfigError(f"skill {s} out of range [0, {num_skills})", path)
        if not isinstance(val, (int, float)) or isinstance(val, bool) or val < 0:
            raise ConfigError(f"hours for skill {s} must be nonnegative, got {val!r}", path)
        out[s] = float(val)
    return out


def validate_config(doc: dict) -> ValidatedSystem:
    """Check a config document and build the system it describes.

    Idempotent: validate_config(sys.to_config()) == sys.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    num_skills = doc.get("skills")
    if not isinstance(num_skills, int) or isinstance(num_skills, bool) or num_skills < 1:
        raise ConfigError("skills must be a positive integer", "skills")
    regime = Regime.from_code(doc.get("regime", ""))

    raw_agents = doc.get("agent_types")
    if not isinstance(raw_agents, list) or not raw_agents:
        raise ConfigError("agent_types must be a nonempty list", "agent_types")
    agents = []
    for m, ra in enumerate(raw_agents):
        path = f"agent_types[{m}]"
        if not isinstance(ra, dict):
            raise ConfigError("agent type must be a mapping", path)
        skills = _parse_skills(ra.get("skills"), num_skills, path + ".skills")
        hours = ra.get("hours")
        if regime.agents_flexible:
            if not isinstance(hours, (int, float)) or isinstance(hours, bool) or hours <= 0:
                raise ConfigError("flexible agents need scalar hours > 0", path + ".hours")
            agents.append(AgentTypeSpec(skills=skills, flexible_hours=float(hours)))
        else:
            hmap = _parse_hour_map(hours, num_skills, path + ".hours")
            if set(hmap) != set(skills):
                raise ConfigError("hour map keys must equal the skill set", path + ".hours")
            vec = tuple(hmap.get(s, 0.0) for s in range(num_skills))
            agents.append(AgentTypeSpec(skills=skills, inflexible_hours=vec))

    raw_tasks = doc.get("task_types")
    if not isinstance(raw_tasks, list) or not raw_tasks:
        raise ConfigError("task_types must be a nonempty list", "task_types")
    tasks = []
    for j, rt in enumerate(raw_tasks):
        path = f"task_types[{j}]"
        if not isinstance(rt, dict):
            raise ConfigError("task type must be a mapping", path)
        raw_steps = rt.get("steps")
        if not isinstance(raw_steps, list) or not raw_steps:
            raise ConfigError("steps must be a nonempty list", path + ".steps")
        k_steps = len(raw_steps)
        steps = np.zeros((k_steps, num_skills))
        for k, rs in enumerate(raw_steps):
            hmap = _parse_hour_map(rs, num_skills, f"{path}.steps[{k}]")
            for s, v in hmap.items():
                if v <= 0:
                    raise ConfigError("substep hours must be positive", f"{path}.steps[{k}]")
                steps[k, s] = v
            if steps[k].sum() <= 0:
                raise ConfigError("step has no positive substep", f"{path}.steps[{k}]")
        parents = rt.get("parents")
        if parents is None:
            parents = [-1] + list(range(k_steps - 1))  # chain by default
        if not isinstance(parents, list) or len(parents) != k_steps:
            raise ConfigError("parents must list one entry per step", path + ".parents")
        tree = PrecedenceTree(parent=tuple(int(p) for p in parents))
        rate = rt.get("rate", 0.0)
        if not isinstance(rate, (int, float)) or isinstance(rate, bool) or rate < 0:
            raise ConfigError("rate must be nonnegative", path + ".rate")
        tasks.append(TaskTypeSpec(steps=steps, tree=tree, arrival_rate=float(rate)))

    covered = set()
    for a in agents:
        covered |= a.skills
    for j, tt in enumerate(tasks):
        need = set(int(s) for s in np.nonzero(tt.steps.sum(axis=0))[0])
        missing = need - covered
        if missing:
            raise ConfigError(
                f"skills {sorted(missing)} required but no agent type has them",
                f"task_types[{j}]",
            )

    return ValidatedSystem(
        num_skills=num_skills,
        regime=regime,
        agent_types=tuple(agents),
        task_types=tuple(tasks),
    )
