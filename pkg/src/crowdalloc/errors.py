"""Shared exception types."""

from __future__ import annotations


class ConfigError(ValueError):
    """Raised when a config document or trace file fails validation.

    Carries a dotted path to the offending field when one is known.
    """

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class IntractableInstance(RuntimeError):
    """Raised when an exact routine would exceed its enumeration cap."""


class InfeasibleAllocation(RuntimeError):
    """Raised when an allocation departs more steps than are queued."""


class NoCompletions(RuntimeError):
    """Raised when turnaround statistics are requested but no task finished."""
