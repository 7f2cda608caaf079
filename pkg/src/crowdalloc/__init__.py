"""Allocation policies, capacity analysis, and a discrete-time simulator for
skill-based crowdsourcing systems."""

from ._kernels import BACKEND
from .capacity import (
    MembershipReport,
    boundary_scalar,
    capacity_member,
    counts_feasible,
    enumerate_allocations,
    outer_bound_check,
)
from .constraints import Allocation, Assignment, Availability, check_allocation
from .errors import (
    ConfigError,
    InfeasibleAllocation,
    IntractableInstance,
    NoCompletions,
)
from .model import (
    AgentTypeSpec,
    PrecedenceTree,
    Regime,
    TaskTypeSpec,
    ValidatedSystem,
    validate_config,
)
from .processes import ProcessBundle, ProcessSpec, bundle_from_config, gamma_from_specs
from .registry import make_policy, policy_names
from .sim import MetricsReport, PolicyContext, QueueState, run, stability_diagnostic

__version__ = "0.1.0"

__all__ = [
    "AgentTypeSpec",
    "Allocation",
    "Assignment",
    "Availability",
    "BACKEND",
    "ConfigError",
    "InfeasibleAllocation",
    "IntractableInstance",
    "MembershipReport",
    "MetricsReport",
    "NoCompletions",
    "PolicyContext",
    "PrecedenceTree",
    "ProcessBundle",
    "ProcessSpec",
    "QueueState",
    "Regime",
    "TaskTypeSpec",
    "ValidatedSystem",
    "boundary_scalar",
    "bundle_from_config",
    "capacity_member",
    "check_allocation",
    "counts_feasible",
    "enumerate_allocations",
    "gamma_from_specs",
    "make_policy",
    "outer_bound_check",
    "policy_names",
    "run",
    "stability_diagnostic",
    "validate_config",
    "__version__",
]
