"""Model constructors and verification tools.

Potts and Ising constructors, distances and goodness-of-fit statistics, an
exact probe of how fast boundary influence decays, a monotone bracketing
oracle for two-spin attractive systems, and summaries of recursion traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geometry import Box, graph_boundary, reading_order
from .inference import DEFAULT_MAX_FRONTIER, InferenceProblem, marginal_transfer
from .lazy import RecursionTrace
from .rng import stream
from .spins import SpinSystem, new_spin_system


def potts(q: int, beta: float) -> SpinSystem:
    """Ferromagnetic Potts model: unit field, ``e^beta`` on the diagonal."""
    if beta < 0:
        raise ValueError("antiferromagnetic Potts (beta < 0) is not supported")
    A = np.ones((q, q))
    np.fill_diagonal(A, math.exp(beta))
    return new_spin_system(q, np.ones(q), A, name=f"potts(q={q}, beta={beta})")


def ising(beta: float, h: float = 1.0) -> SpinSystem:
    """Ferromagnetic Ising model with field ``h`` on spin 2."""
    if beta < 0:
        raise ValueError("antiferromagnetic Ising (beta < 0) is not supported")
    if not h > 0:
        raise ValueError(f"field must be positive, got h={h}")
    e = math.exp(beta)
    return new_spin_system(2, [1.0, h], [[e, 1.0], [1.0, e]], name=f"ising(beta={beta}, h={h})")


def potts_critical_beta(q: int) -> float:
    return math.log(1 + math.sqrt(q))


def tv_distance(d1, d2) -> float:
    a = np.asarray(d1, dtype=float)
    b = np.asarray(d2, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return 0.5 * float(np.abs(a - b).sum())


def chi_square_gof(counts, expected) -> float:
    """Pearson statistic of observed counts against expected probabilities."""
    counts = np.asarray(counts, dtype=float).reshape(-1)
    expected = np.asarray(expected, dtype=float).reshape(-1)
    if counts.shape != expected.shape:
        raise ValueError("counts and expected differ in length")
    n = counts.sum()
    if not n > 0:
        raise ValueError("no observations")
    if np.any(expected <= 0):
        raise ValueError("every expected cell must be positive")
    exp = expected * n
    return float(((counts - exp) ** 2 / exp).sum())


@dataclass(frozen=True)
class DecayTable:
    rows: tuple

    @property
    def ells(self) -> list[int]:
        return [r[0] for r in self.rows]

    @property
    def tv(self) -> list[float]:
        return [r[1] for r in self.rows]

    def log_slope(self) -> float:
        """Least-squares slope of log(tv) against the scale."""
        ell = np.array(self.ells, dtype=float)
        tv = np.array(self.tv)
        if np.any(tv <= 0):
            return -math.inf
        return float(np.polyfit(ell, np.log(tv), 1)[0])


def _constant_box_marginal(system, half: int, spin: int, radius: int, max_frontier: int):
    box = Box(-half, -half, half, half)
    ctx = {v: spin for v in graph_boundary(box)}
    target = Box(-radius, -radius, radius, radius)
    return marginal_transfer(InferenceProblem(system, set(box), ctx, tuple(target)), max_frontier)


def wsm_probe(
    system: SpinSystem,
    ells: Iterable[int],
    target_radius: int = 0,
    boundary_spins: Sequence[int] = None,
    max_frontier: int = DEFAULT_MAX_FRONTIER,
) -> DecayTable:
    """Exact TV between two constant boundaries at growing distances.

    For each scale ``ell`` the free region is the ``(2 ell - 1)``-square centred
    at the origin, and the target is the centred square of radius
    ``target_radius`` (the single centre vertex by default). Boundaries are
    constant at ``boundary_spins`` (spins 1 and q by default). This only
    bounds the worst case over boundary pairs from below.
    """
    lo, hi = boundary_spins or (1, system.q)
    rows = []
    last = 0
    for ell in ells:
        if ell <= last:
            raise ValueError("scales must be strictly increasing")
        if ell <= target_radius:
            raise ValueError(f"scale {ell} does not contain the target")
        last = ell
        a = _constant_box_marginal(system, ell - 1, lo, target_radius, max_frontier)
        b = _constant_box_marginal(system, ell - 1, hi, target_radius, max_frontier)
        rows.append((ell, min(1.0, tv_distance(a, b))))
    return DecayTable(tuple(rows))


def bracket_bounds(system: SpinSystem, box_half: int, max_frontier: int = DEFAULT_MAX_FRONTIER):
    """Centre P(spin 2) in a box under all-1 and all-2 boundaries.

    For attractive two-spin systems these sandwich the corresponding
    infinite-volume probability.
    """
    if not system.monotone_eligible:
        raise ValueError("bracketing needs a monotone-eligible system")
    lo = _constant_box_marginal(system, box_half, 1, 0, max_frontier)[1]
    hi = _constant_box_marginal(system, box_half, 2, 0, max_frontier)[1]
    return float(lo), float(hi)


@dataclass(frozen=True)
class BranchingSummary:
    runs: int
    mean_calls: float
    max_depth: int
    indecision_frequency: float
    size_histogram: dict

    def tail(self, k: int) -> float:
        """Fraction of runs with more than ``k`` calls."""
        big = sum(c for size, c in self.size_histogram.items() if size > k)
        return big / self.runs


def branching_stats(traces: Sequence[RecursionTrace]) -> BranchingSummary:
    """Aggregate lazy call trees, one run per trace.

    ``indecision_frequency`` is the fraction of all calls that fell in the
    zone of indecision and recursed.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("need at least one trace")
    sizes = [tr.total_calls for tr in traces]
    calls = sum(sizes)
    recursed = sum(tr.recursed for tr in traces)
    hist: dict = {}
    for s in sizes:
        hist[s] = hist.get(s, 0) + 1
    return BranchingSummary(
        runs=len(sizes),
        mean_calls=calls / len(sizes),
        max_depth=max(tr.max_depth for tr in traces),
        indecision_frequency=recursed / calls if calls else 0.0,
        size_histogram=dict(sorted(hist.items())),
    )


@dataclass(frozen=True)
class OracleInstance:
    problem: InferenceProblem
    q: int
    beta: float
    h: float
    width: int
    height: int


def random_oracle_instances(n: int, seed: int = 0, max_side: int = 5, max_free_states: int = 2**14):
    """Random small conditional-inference problems for engine cross-checks.

    Each instance picks q in {2, 3}, beta in [0, 1.5], a field in [0.5, 2]
    on the last spin, a rectangle of side at most ``max_side``, a random
    partial boundary (missing neighbours drop their edges) and enough random
    interior pins to keep the free state space under ``max_free_states``.
    One or two free vertices are queried.
    """
    rng = stream(seed)
    out = []
    for _ in range(n):
        q = int(rng.integers(2, 4))
        beta = float(rng.uniform(0.0, 1.5))
        h = float(rng.uniform(0.5, 2.0))
        e = math.exp(beta)
        A = np.ones((q, q))
        np.fill_diagonal(A, e)
        b = np.ones(q)
        b[-1] = h
        system = new_spin_system(q, b, A, name="random")
        w, ht = (int(s) for s in rng.integers(1, max_side + 1, size=2))
        box = Box(0, 0, w - 1, ht - 1)
        cells = list(box)
        context = {}
        for v in sorted(graph_boundary(box), key=reading_order):
            if rng.random() < 0.7:
                context[v] = int(rng.integers(1, q + 1))
        order = rng.permutation(len(cells))
        free = set(cells)
        for k in order:
            if q ** len(free) <= max_free_states:
                break
            v = cells[int(k)]
            free.discard(v)
            context[v] = int(rng.integers(1, q + 1))
        ordered = sorted(free, key=reading_order)
        nq = min(len(ordered), int(rng.integers(1, 3)))
        picks = rng.choice(len(ordered), size=nq, replace=False)
        query = tuple(ordered[int(i)] for i in picks)
        problem = InferenceProblem(system, free, context, query, free_boundary=True)
        out.append(OracleInstance(problem, q, beta, h, w, ht))
    return out
