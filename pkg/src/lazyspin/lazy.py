"""Lazy depth-first perfect sampling on the L-mesh.

A call at mesh vertex ``v`` computes lower bounds ``p[i]`` on the probability of
each spin at ``v`` that hold whatever the unknown vertices of the frame of
``v`` turn out to be. One uniform ``y`` is drawn; if it lands in the interval of
some spin, that spin is returned at once. Otherwise the unknown frame vertices
are sampled recursively (each call sees the spins returned by the calls before
it), the exact conditional law at ``v`` given the now complete frame is
computed, and the residual mass ``mu[i] - p[i]`` decides the spin using the
same ``y``. The frame spins sampled along the way are then forgotten: a call
only ever adds its own vertex to the known configuration.

The recursion is driven by an explicit stack, so arbitrarily deep call trees
are limited only by the call budget.
"""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BudgetExhausted, CapExceeded, InfeasibleError
from .geometry import (
    Box,
    Frame,
    Vertex,
    cell_of,
    frame_of,
    neighbors,
    on_mesh,
    reading_order,
    square_boundary,
)
from .inference import (
    DEFAULT_MAX_FRONTIER,
    InferenceProblem,
    contract_legs,
    marginal_transfer,
    sample_exact,
)
from .rng import stream
from .spins import Configuration, SpinSystem

STRATEGIES = ("exact-min", "monotone", "trivial")
DEFAULT_BUDGET = 10**7
DEFAULT_MAX_FILLINGS = 2**22
RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class PVector:
    """Lower bounds on the spin probabilities at one vertex.

    ``lower_bounds[i - 1]`` is the bound for spin ``i``; ``indecision`` is the
    remaining mass. Spin ``i`` owns ``[cum[i-2], cum[i-1])`` and the zone of
    indecision is ``[cum[-1], 1]``.
    """

    lower_bounds: np.ndarray
    indecision: float
    cum: tuple

    @classmethod
    def from_bounds(cls, bounds) -> "PVector":
        bounds = np.clip(np.asarray(bounds, dtype=float), 0.0, None)
        total = float(bounds.sum())
        if total > 1.0 + 1e-9:
            raise ValueError(f"lower bounds sum to {total} > 1")
        bounds.setflags(write=False)
        return cls(bounds, max(0.0, 1.0 - total), tuple(np.cumsum(bounds).tolist()))

    @property
    def intervals(self) -> list[tuple[float, float]]:
        edges = (0.0,) + self.cum
        out = [(edges[i], edges[i + 1]) for i in range(len(self.cum))]
        out.append((self.cum[-1], 1.0))
        return out

    def decide(self, y: float) -> Optional[int]:
        """Spin whose interval holds ``y``, or None inside the zone of indecision."""
        if y < self.cum[-1]:
            return bisect.bisect_right(self.cum, y) + 1
        return None


@dataclass
class TraceNode:
    vertex: Vertex
    parent: int
    depth: int
    decided: bool = True
    spin: int = 0
    children: int = 0


@dataclass
class RecursionTrace:
    """Every lazy call of one run, in the order the calls were made."""

    nodes: list = field(default_factory=list)

    @property
    def total_calls(self) -> int:
        return len(self.nodes)

    @property
    def max_depth(self) -> int:
        return max((n.depth for n in self.nodes), default=0)

    @property
    def recursed(self) -> int:
        return sum(1 for n in self.nodes if not n.decided)

    def roots(self) -> list[int]:
        return [k for k, n in enumerate(self.nodes) if n.parent < 0]

    def subtree_sizes(self) -> list[int]:
        """Number of calls in the tree under each root call."""
        sizes = [1] * len(self.nodes)
        for k in range(len(self.nodes) - 1, -1, -1):
            p = self.nodes[k].parent
            if p >= 0:
                sizes[p] += sizes[k]
        return [sizes[k] for k in self.roots()]


@dataclass
class SamplerState:
    """Known spins, trace and uniform stream threaded through one run.

    ``calls`` counts every lazy call made so far against the sampler budget.
    After a budget abort the known configuration may still hold temporary
    frame spins and the state should be discarded.
    """

    known: dict
    rng: object
    trace: RecursionTrace = field(default_factory=RecursionTrace)
    calls: int = 0


@dataclass
class _Pending:
    v: Vertex
    p: PVector
    y: float
    order: list
    node: int
    next: int = 0
    added: list = field(default_factory=list)


def frame_order(frame: Frame, known) -> list[Vertex]:
    """Unknown frame vertices in the frame's clockwise order."""
    return [u for u in frame.vertices if u not in known]


class LazySampler:
    """Lazy sampler for one spin system, mesh parameter and bound strategy.

    Lower-bound vectors and full-frame conditionals are memoized by the local
    pattern: the position of ``v`` in its ``2L``-square and the spins of the
    known mesh vertices of the closed square. By the Gibbs property nothing
    else enters either quantity. Cache hits never change results.
    """

    def __init__(
        self,
        system: SpinSystem,
        L: int,
        strategy: str = "exact-min",
        budget: int = DEFAULT_BUDGET,
        max_fillings: int = DEFAULT_MAX_FILLINGS,
        max_frontier: int = DEFAULT_MAX_FRONTIER,
        memoize: bool = True,
    ):
        if L < 1:
            raise ValueError(f"mesh parameter must be positive, got {L}")
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
        if strategy == "monotone" and not system.monotone_eligible:
            raise ValueError("monotone strategy requires a monotone-eligible system")
        self.system = system
        self.L = L
        self.strategy = strategy
        self.budget = budget
        self.max_fillings = max_fillings
        self.max_frontier = max_frontier
        self.memoize = memoize
        self._p_cache: dict = {}
        self._mu_cache: dict = {}

        side = 2 * L
        self._frame_offsets = square_boundary((0, 0), side)
        self._interior_offsets = tuple(Box.square((0, 0), side))
        interior_mesh = tuple(o for o in self._interior_offsets if on_mesh(o, L))
        self._local_offsets = self._frame_offsets + interior_mesh

    # -- local problem ---------------------------------------------------------

    def _pattern(self, v: Vertex, anchor: Vertex, known) -> tuple:
        k, l = anchor
        get = known.get
        spins = tuple(get((k + a, l + b), 0) for a, b in self._local_offsets)
        return (v[0] - k, v[1] - l) + spins

    def _local(self, v: Vertex, frame: Frame, known):
        """Free interior sites and known spins of the closed square."""
        interior = frame.interior
        free = [u for u in interior if u not in known]
        context = {u: known[u] for u in frame.vertices if u in known}
        context.update((u, known[u]) for u in interior if u in known)
        return free, context

    # -- lower bounds ----------------------------------------------------------

    def lower_bounds(self, v: Vertex, known: Configuration) -> PVector:
        if not on_mesh(v, self.L):
            raise ValueError(f"{v} is not on the L={self.L} mesh")
        if v in known:
            raise ValueError(f"{v} is already known")
        q = self.system.q
        if self.strategy == "trivial":
            return PVector.from_bounds(np.zeros(q))
        frame = frame_of(v, self.L)
        key = None
        if self.memoize:
            key = self._pattern(v, frame.anchor, known)
            hit = self._p_cache.get(key)
            if hit is not None:
                return hit
        if self.strategy == "exact-min":
            pv = self._exact_min(v, frame, known)
        else:
            pv = self._monotone(v, frame, known)
        if key is not None:
            self._p_cache[key] = pv
        return pv

    def _exact_min(self, v: Vertex, frame: Frame, known) -> PVector:
        q = self.system.q
        A = self.system.A
        free, context = self._local(v, frame, known)
        free_set = set(free)
        # each frame vertex touches exactly one interior site; unknown frame
        # vertices touching a known site cancel out of the conditional law
        attached: dict = {}
        for u in frame.vertices:
            if u not in known:
                for w in neighbors(u):
                    if w in free_set:
                        attached[w] = attached.get(w, 0) + 1
        n_open = sum(attached.values())
        if n_open * math.log(q) > math.log(self.max_fillings) + 1e-9:
            raise CapExceeded(f"{q}^{n_open} frame fillings exceed the cap {self.max_fillings}")
        # only the multiset of frame spins around a site matters
        legs = []
        for w in sorted(attached, key=reading_order):
            combos = itertools.combinations_with_replacement(range(q), attached[w])
            rows = np.array([np.prod(A[list(c)], axis=0) for c in combos])
            legs.append([(rows, w)])
        Z = contract_legs(self.system, free, context, v, legs)
        total = Z.sum(axis=1)
        feasible = total > 0
        if not feasible.all():
            if not feasible.any():
                raise InfeasibleError(f"no feasible frame filling around {v}")
            Z, total = Z[feasible], total[feasible]
        return PVector.from_bounds((Z / total[:, None]).min(axis=0))

    def _monotone(self, v: Vertex, frame: Frame, known) -> PVector:
        free, context = self._local(v, frame, known)
        unknown = [u for u in frame.vertices if u not in known]
        lows = np.ones(self.system.q)
        for spin in (1, 2):
            ctx = dict(context)
            ctx.update((u, spin) for u in unknown)
            problem = InferenceProblem(self.system, free, ctx, (v,))
            lows = np.minimum(lows, marginal_transfer(problem, self.max_frontier))
        return PVector.from_bounds(lows)

    def conditional(self, v: Vertex, known: Configuration) -> np.ndarray:
        """Exact law of the spin at ``v`` given a fully known frame."""
        frame = frame_of(v, self.L)
        key = None
        if self.memoize:
            key = self._pattern(v, frame.anchor, known)
            hit = self._mu_cache.get(key)
            if hit is not None:
                return hit
        missing = [u for u in frame.vertices if u not in known]
        if missing:
            raise ValueError(f"frame of {v} still has {len(missing)} unknown vertices")
        free, context = self._local(v, frame, known)
        mu = marginal_transfer(InferenceProblem(self.system, free, context, (v,)), self.max_frontier)
        mu.setflags(write=False)
        if key is not None:
            self._mu_cache[key] = mu
        return mu

    # -- recursion -------------------------------------------------------------

    def new_state(self, seed: int = 0, index: int = 0, known=None, rng=None) -> SamplerState:
        return SamplerState(dict(known or {}), rng if rng is not None else stream(seed, index))

    def _open(self, state: SamplerState, stack: list, v: Vertex, parent: int,
              p: Optional[PVector] = None, y: Optional[float] = None) -> Optional[int]:
        """Start a lazy call at ``v``; return its spin if decided immediately."""
        if state.calls >= self.budget:
            raise BudgetExhausted(
                f"call budget {self.budget} exhausted after {state.trace.total_calls} calls "
                f"(max depth {state.trace.max_depth})",
                state.trace,
            )
        state.calls += 1
        nodes = state.trace.nodes
        node = len(nodes)
        nodes.append(TraceNode(v, parent, len(stack)))
        if p is None:
            p = self.lower_bounds(v, state.known)
        if y is None:
            y = state.rng.random()
            spin = p.decide(y)
            if spin is not None:
                nodes[node].spin = spin
                return spin
        order = frame_order(frame_of(v, self.L), state.known)
        nodes[node].decided = False
        nodes[node].children = len(order)
        stack.append(_Pending(v, p, y, order, node))
        return None

    def _close(self, state: SamplerState, rec: _Pending) -> int:
        """Finish a recursing call: residual lookup, then forget the frame spins."""
        mu = self.conditional(rec.v, state.known)
        p = rec.p
        rho = mu - p.lower_bounds
        if rho.min() < -RESIDUAL_TOL:
            raise RuntimeError(
                f"negative residual {rho.min():.3e} at {rec.v}: lower bounds exceed the conditional law"
            )
        rho = np.clip(rho, 0.0, None)
        base = p.cum[-1]
        cum = (base + np.cumsum(rho)).tolist()
        if rec.y < base - RESIDUAL_TOL:
            raise RuntimeError(f"y={rec.y} is not in the zone of indecision")
        spin = bisect.bisect_right(cum, rec.y) + 1
        if spin > len(cum):
            if rec.y - cum[-1] > RESIDUAL_TOL:
                raise RuntimeError(f"y={rec.y} beyond the residual intervals ending at {cum[-1]}")
            spin = int(np.flatnonzero(rho > 0)[-1]) + 1 if rho.any() else len(cum)
        for w in rec.added:
            del state.known[w]
        state.trace.nodes[rec.node].spin = spin
        return spin

    def _run(self, state: SamplerState, v: Vertex, p=None, y=None) -> int:
        stack: list = []
        spin = self._open(state, stack, v, -1, p, y)
        while stack:
            rec = stack[-1]
            if spin is not None:
                w = rec.order[rec.next - 1]
                state.known[w] = spin
                rec.added.append(w)
                spin = None
            if rec.next < len(rec.order):
                w = rec.order[rec.next]
                rec.next += 1
                spin = self._open(state, stack, w, rec.node)
                continue
            spin = self._close(state, stack.pop())
        state.known[v] = spin
        return spin

    def lazy(self, state: SamplerState, v: Vertex) -> int:
        """Sample the spin at unknown mesh vertex ``v`` and add it to ``state.known``."""
        if v in state.known:
            raise ValueError(f"{v} is already known")
        if not on_mesh(v, self.L):
            raise ValueError(f"{v} is not on the L={self.L} mesh")
        return self._run(state, v)

    def bd_calc(self, state: SamplerState, v: Vertex, p: PVector, y: float) -> int:
        """Resolve ``v`` from the zone of indecision with the given draw ``y``."""
        if p.decide(y) is not None:
            raise ValueError(f"y={y} is not in the zone of indecision")
        if v in state.known:
            raise ValueError(f"{v} is already known")
        return self._run(state, v, p, y)

    # -- windows ---------------------------------------------------------------

    def mesh_targets(self, window) -> tuple[list[Vertex], list[Vertex]]:
        """Mesh vertices to sample lazily and anchors of the cells to fill.

        The mesh part covers the on-mesh window vertices plus the frames of all
        cells meeting the window, in reading order.
        """
        L = self.L
        targets = set()
        anchors = set()
        for v in window:
            if on_mesh(v, L):
                targets.add(v)
            else:
                anchor, _, frame = cell_of(v, L)
                if anchor not in anchors:
                    anchors.add(anchor)
                    targets.update(frame)
        return sorted(targets, key=reading_order), sorted(anchors, key=reading_order)

    def sample_window(self, window, seed: int = 0, index: int = 0, state=None) -> tuple[dict, RecursionTrace]:
        """Sample the spins of ``window`` from the infinite-volume measure.

        Returns:
            ``(configuration, trace)``, the configuration restricted to the
            window and the trace of every lazy call made.
        """
        window = window if isinstance(window, Box) else list(window)
        if state is None:
            state = self.new_state(seed, index)
        targets, anchors = self.mesh_targets(window)
        for v in targets:
            if v not in state.known:
                self.lazy(state, v)
        filled = dict(state.known)
        for anchor in anchors:
            interior = Box.square(anchor, self.L)
            frame = square_boundary(anchor, self.L)
            ctx = {u: state.known[u] for u in frame}
            filled.update(sample_exact(InferenceProblem(self.system, interior, ctx), state.rng))
        return {v: filled[v] for v in window}, state.trace


def lower_bounds(system: SpinSystem, L: int, v: Vertex, known: Configuration,
                 strategy: str = "exact-min", **kwargs) -> PVector:
    return LazySampler(system, L, strategy, memoize=False, **kwargs).lower_bounds(v, known)


def sample_window(system: SpinSystem, L: int, window, seed: int, strategy: str = "exact-min",
                  **kwargs) -> tuple[dict, RecursionTrace]:
    return LazySampler(system, L, strategy, **kwargs).sample_window(window, seed)
