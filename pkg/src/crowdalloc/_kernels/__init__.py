"""Kernel backend selection.

The compiled extension is preferred; the pure-Python fallback is used when it
is missing or when CROWDALLOC_FORCE_FALLBACK is set. Both backends are
bit-compatible, so the choice never changes results, only speed.
"""

from __future__ import annotations

import os

if os.environ.get("CROWDALLOC_FORCE_FALLBACK"):
    from . import fallback as _impl

    BACKEND = "fallback"
else:
    try:
        from . import _native as _impl  # type: ignore[attr-defined]

        BACKEND = "native"
    except ImportError:
        from . import fallback as _impl

        BACKEND = "fallback"

bounded_knapsack = _impl.bounded_knapsack
simplex_pivot = _impl.simplex_pivot
exact_dfs = _impl.exact_dfs

__all__ = ["BACKEND", "bounded_knapsack", "simplex_pivot", "exact_dfs"]
