"""Exceptions shared across the package."""

from __future__ import annotations


class InfeasibleError(ValueError):
    """A boundary condition admits no configuration of positive weight."""


class CapExceeded(RuntimeError):
    """An enumeration or transfer state space is larger than the configured cap."""


class BudgetExhausted(RuntimeError):
    """The lazy sampler made more calls than its budget allows.

    The partial recursion trace is attached so callers can report how far the
    run got before it was stopped.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
