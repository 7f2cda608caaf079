"""Policy lookup by name, gated by the regime each policy supports."""

from __future__ import annotations

from .errors import ConfigError
from .policies_central import (
    CentralizedExact,
    CentralizedFiDecomposition,
    CentralizedLpFf,
    CentralizedLpIf,
)
from .policies_greedy import (
    Algo1,
    Algo2,
    Algo3,
    FlexGreedy,
    PrioritizedGreedy,
    RestrictedGreedy,
)

_FACTORIES = {
    cls.name: cls
    for cls in (
        CentralizedExact,
        CentralizedLpIf,
        CentralizedLpFf,
        CentralizedFiDecomposition,
        PrioritizedGreedy,
        FlexGreedy,
        RestrictedGreedy,
        Algo1,
        Algo2,
        Algo3,
    )
}


def policy_names() -> list[str]:
    return sorted(_FACTORIES)


def make_policy(name: str, regime_code: str, **kwargs):
    """Instantiate a policy after checking it supports the regime."""
    cls = _FACTORIES.get(name)
    if cls is None:
        raise ConfigError(
            f"unknown policy {name!r}; known: {', '.join(policy_names())}"
        )
    if regime_code not in cls.regimes:
        raise ConfigError(
            f"policy {name!r} handles regimes {'/'.join(cls.regimes)}, "
            f"not {regime_code}"
        )
    return cls(**kwargs)
