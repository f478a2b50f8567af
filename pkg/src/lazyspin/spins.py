"""Spin systems on Z^2 and the configuration algebra.

Spins are 1-based integers ``1..q`` in every public configuration. Arrays
indexed by spin (fields, interaction rows, marginals) use position ``i - 1``.
A partial configuration is an ordinary mapping from vertex to spin; functions
here never mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .geometry import Vertex, neighbors

Configuration = Mapping[Vertex, int]


@dataclass(frozen=True, eq=False)
class SpinSystem:
    """A q-spin system with field ``b`` and symmetric interaction matrix ``A``.

    Use :func:`new_spin_system` (or the model constructors) rather than calling
    this directly; the flags are derived there.
    """

    q: int
    b: np.ndarray
    A: np.ndarray
    soft_row: Optional[int] = None
    strictly_positive: bool = False
    monotone_eligible: bool = False
    name: str = field(default="custom", compare=False)

    @property
    def log_b(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.b)

    @property
    def log_A(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.A)

    @property
    def alpha(self) -> Optional[float]:
        """Smallest entry of the soft witness row, if any."""
        if self.soft_row is None:
            return None
        return float(self.A[self.soft_row - 1].min())

    def __repr__(self):
        return f"SpinSystem(q={self.q}, name={self.name!r})"


def new_spin_system(q, b, A, name: str = "custom") -> SpinSystem:
    """Validate ``(q, b, A)`` and compute the system flags.

    ``soft_row`` is the smallest 1-based row index whose entries are all
    positive. ``monotone_eligible`` marks two-spin attractive systems, for which
    the spin-2 marginal is monotone in the boundary condition.
    """
    q = int(q)
    if q < 2:
        raise ValueError(f"need at least two spins, got q={q}")
    b = np.array(b, dtype=float).reshape(-1)
    A = np.array(A, dtype=float)
    if b.shape != (q,) or A.shape != (q, q):
        raise ValueError(f"inconsistent dimensions: b{b.shape}, A{A.shape} for q={q}")
    if not (np.all(np.isfinite(b)) and np.all(np.isfinite(A))):
        raise ValueError("field and interaction entries must be finite")
    if np.any(b < 0) or np.any(A < 0):
        raise ValueError("field and interaction entries must be nonnegative")
    if not np.any(b > 0):
        raise ValueError("field vector is identically zero")
    if not np.array_equal(A, A.T):
        raise ValueError("interaction matrix must be symmetric")

    soft = [i + 1 for i in range(q) if np.all(A[i] > 0)]
    strictly_positive = bool(np.all(A > 0) and np.all(b > 0))
    monotone = q == 2 and A[0, 0] * A[1, 1] >= A[0, 1] * A[1, 0] and A[0, 1] > 0
    b.setflags(write=False)
    A.setflags(write=False)
    return SpinSystem(
        q=q,
        b=b,
        A=A,
        soft_row=soft[0] if soft else None,
        strictly_positive=strictly_positive,
        monotone_eligible=bool(monotone),
        name=name,
    )


def check_configuration(system: SpinSystem, config: Configuration) -> None:
    for v, s in config.items():
        if not (isinstance(s, (int, np.integer)) and 1 <= s <= system.q):
            raise ValueError(f"spin {s!r} at {v} outside 1..{system.q}")


def log_weight(system: SpinSystem, interior: Configuration, context: Configuration) -> float:
    """Log Gibbs weight of ``interior`` given fixed ``context`` spins.

    Charges ``log b`` for every interior vertex, and ``log A`` once for every
    lattice edge with at least one endpoint in the interior whose other
    endpoint is assigned (in either configuration). Edges to unassigned
    vertices are dropped. Returns ``-inf`` when some factor vanishes.
    """
    overlap = interior.keys() & context.keys()
    if overlap:
        raise ValueError(f"interior and context overlap on {sorted(overlap)}")
    log_b = system.log_b
    log_A = system.log_A
    total = 0.0
    for v, s in interior.items():
        total += log_b[s - 1]
        for w in neighbors(v):
            t = interior.get(w)
            if t is not None:
                # count interior-interior edges from one side only
                if w < v:
                    total += log_A[s - 1, t - 1]
                continue
            t = context.get(w)
            if t is not None:
                total += log_A[s - 1, t - 1]
    return float(total)


def merge(a: Configuration, b: Configuration) -> dict:
    """The configuration on both domains agreeing with ``a`` and ``b``."""
    out = dict(a)
    for v, s in b.items():
        if out.setdefault(v, s) != s:
            raise ValueError(f"configurations disagree at {v}: {out[v]} vs {s}")
    return out


def restrict(a: Configuration, region) -> dict:
    return {v: s for v, s in a.items() if v in region}


def relabel(system: SpinSystem, perm) -> SpinSystem:
    """Spin system with spin ``i`` renamed to ``perm[i-1]`` (1-based)."""
    perm = np.asarray(perm) - 1
    inv = np.argsort(perm)
    return new_spin_system(system.q, system.b[inv], system.A[np.ix_(inv, inv)], system.name)

