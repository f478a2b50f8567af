"""Exact conditional inference on finite regions of Z^2.

Two independent engines compute the same quantities:

* brute force, enumerating every assignment of the free region, and
* a row transfer sweep across the bounding rectangle of the free region, whose
  frontier holds one spin per column.

Both work in the log domain. Context vertices inside the bounding rectangle
are allowed: they act only through the field they exert on free neighbours.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import opt_einsum

from .errors import CapExceeded, InfeasibleError
from .geometry import Vertex, graph_boundary, neighbors, reading_order
from .spins import Configuration, SpinSystem, check_configuration, log_weight

DEFAULT_MAX_STATES = 2**26
DEFAULT_MAX_FRONTIER = 2**20
_CHUNK = 2**16


@dataclass(frozen=True, eq=False)
class InferenceProblem:
    """Free region, fixed context and query vertices for one spin system.

    With ``free_boundary=False`` (the default) the context must cover the graph
    boundary of ``free`` so that the rest of the lattice is screened off.
    Setting it to ``True`` declares that missing neighbours simply contribute
    no edge factor.
    """

    system: SpinSystem
    free: frozenset
    context: Configuration
    query: tuple = ()
    free_boundary: bool = False

    def __post_init__(self):
        object.__setattr__(self, "free", frozenset(self.free))
        object.__setattr__(self, "context", dict(self.context))
        query = tuple(sorted(set(self.query), key=reading_order))
        object.__setattr__(self, "query", query)
        overlap = self.free & self.context.keys()
        if overlap:
            raise ValueError(f"context assigns free vertices {sorted(overlap)}")
        if not set(query) <= self.free:
            raise ValueError("query vertices must belong to the free region")
        check_configuration(self.system, self.context)
        if not self.free_boundary:
            missing = graph_boundary(self.free) - self.context.keys()
            if missing:
                raise ValueError(
                    f"context misses {len(missing)} boundary vertices; "
                    "pass free_boundary=True to drop those edges"
                )

    @property
    def ordered_free(self) -> list[Vertex]:
        return sorted(self.free, key=reading_order)

    def with_context(self, extra: Configuration, query=()) -> "InferenceProblem":
        """The problem with ``extra`` moved from the free region into the context."""
        ctx = dict(self.context)
        ctx.update(extra)
        return InferenceProblem(
            self.system, self.free - extra.keys(), ctx, query, self.free_boundary
        )


def _site_log_fields(problem: InferenceProblem, order: Sequence[Vertex]) -> np.ndarray:
    """Per free vertex: log b plus log A toward every context neighbour."""
    sys_ = problem.system
    log_A = sys_.log_A
    out = np.tile(sys_.log_b, (len(order), 1))
    ctx = problem.context
    for k, v in enumerate(order):
        for w in neighbors(v):
            t = ctx.get(w)
            if t is not None:
                out[k] += log_A[:, t - 1]
    return out


def _free_edges(order: Sequence[Vertex]) -> list[tuple[int, int]]:
    index = {v: k for k, v in enumerate(order)}
    edges = []
    for k, (x, y) in enumerate(order):
        for w in ((x + 1, y), (x, y + 1)):
            j = index.get(w)
            if j is not None:
                edges.append((k, j))
    return edges


def _enumerate_log_weights(problem: InferenceProblem, max_states: int):
    """Yield ``(digits, log_weights)`` chunks over every free assignment.

    ``digits[:, k]`` is the 0-based spin of the k-th free vertex in reading
    order. Chunks come in lexicographic order of the assignment index.
    """
    q = problem.system.q
    order = problem.ordered_free
    n = len(order)
    if n * math.log(q) > math.log(max_states) + 1e-9:
        raise CapExceeded(f"{q}^{n} assignments exceed the enumeration cap {max_states}")
    fields = _site_log_fields(problem, order)
    edges = _free_edges(order)
    log_A = problem.system.log_A
    total = q**n
    powers = q ** np.arange(n - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        digits = (idx[:, None] // powers) % q
        lw = np.zeros(len(idx))
        for k in range(n):
            lw += fields[k, digits[:, k]]
        for a, c in edges:
            lw += log_A[digits[:, a], digits[:, c]]
        yield digits, lw


class _BinnedLogSum:
    """Streaming log-sum-exp into a fixed number of bins."""

    def __init__(self, nbins: int):
        self.shift = -np.inf
        self.sums = np.zeros(nbins)

    def add(self, bins: np.ndarray, lw: np.ndarray):
        m = lw.max() if len(lw) else -np.inf
        if m == -np.inf:
            return
        if m > self.shift:
            if self.shift > -np.inf:
                self.sums *= math.exp(self.shift - m)
            self.shift = m
        np.add.at(self.sums, bins, np.exp(lw - self.shift))

    def logs(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.sums) + self.shift


def log_partition_brute(problem: InferenceProblem, max_states: int = DEFAULT_MAX_STATES) -> float:
    """Log of the conditional partition sum over every assignment of the free region."""
    acc = _BinnedLogSum(1)
    for digits, lw in _enumerate_log_weights(problem, max_states):
        acc.add(np.zeros(len(lw), dtype=np.int64), lw)
    return float(acc.logs()[0])


def _query_positions(problem: InferenceProblem) -> list[int]:
    order = problem.ordered_free
    index = {v: k for k, v in enumerate(order)}
    return [index[v] for v in problem.query]


def marginal_brute(problem: InferenceProblem, max_states: int = DEFAULT_MAX_STATES) -> np.ndarray:
    """Joint distribution of the query vertices by exhaustive enumeration.

    Returns:
        Array of shape ``(q,) * len(query)``; axis ``k`` is the query vertex
        ``problem.query[k]`` and index ``i - 1`` its spin ``i``.
    """
    q = problem.system.q
    pos = _query_positions(problem)
    nq = len(pos)
    acc = _BinnedLogSum(q**nq)
    qpow = q ** np.arange(nq - 1, -1, -1, dtype=np.int64)
    for digits, lw in _enumerate_log_weights(problem, max_states):
        bins = digits[:, pos] @ qpow if nq else np.zeros(len(lw), dtype=np.int64)
        acc.add(bins, lw)
    return _normalize(acc.logs()).reshape((q,) * nq)


def _normalize(logs: np.ndarray) -> np.ndarray:
    top = logs.max()
    if top == -np.inf:
        raise InfeasibleError("every assignment has zero weight under this context")
    p = np.exp(logs - top)
    return p / p.sum()


def _sweep_rows(problem: InferenceProblem, max_frontier: int):
    """Lay the free region out as rows of cells for the transfer sweep.

    Each cell is either ``None`` (inactive: context or outside the region) or
    the log field vector of a free vertex. The bounding rectangle is swept
    along its longer side so the frontier is as narrow as possible.
    """
    order = problem.ordered_free
    if not order:
        return [], 0
    fields = dict(zip(order, _site_log_fields(problem, order)))
    xs = [v[0] for v in order]
    ys = [v[1] for v in order]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    transpose = (x1 - x0) > (y1 - y0)
    if transpose:
        rows = [[fields.get((x, y)) for y in range(y0, y1 + 1)] for x in range(x0, x1 + 1)]
    else:
        rows = [[fields.get((x, y)) for x in range(x0, x1 + 1)] for y in range(y0, y1 + 1)]
    w = len(rows[0])
    if w * math.log(problem.system.q) > math.log(max_frontier) + 1e-9:
        raise CapExceeded(
            f"transfer frontier {problem.system.q}^{w} exceeds the cap {max_frontier}"
        )
    return rows, w


def _transfer_log_partition(system: SpinSystem, rows, w: int) -> float:
    if not rows:
        return 0.0
    q = system.q
    a_max = float(system.A.max())
    A = system.A / a_max
    log_a_max = math.log(a_max)
    T = np.ones((1,) * w)
    log_z = 0.0
    active = [False] * w
    for row in rows:
        for c, lf in enumerate(row):
            T = np.moveaxis(T, c, -1)
            if lf is None:
                T = T.sum(axis=-1, keepdims=True)
                active[c] = False
            else:
                m = lf.max()
                if m == -np.inf:
                    return -math.inf
                log_z += m
                if active[c]:
                    T = T @ A
                    log_z += log_a_max
                else:
                    T = T.sum(axis=-1, keepdims=True) * np.ones(q)
                if c > 0 and active[c - 1]:
                    shape = [1] * T.ndim
                    shape[c - 1] = q
                    shape[-1] = q
                    T = T * A.reshape(shape)
                    log_z += log_a_max
                T = T * np.exp(lf - m)
                active[c] = True
            T = np.moveaxis(T, -1, c)
            s = T.max()
            if not s > 0:
                return -math.inf
            T = T / s
            log_z += math.log(s)
    return log_z + math.log(T.sum())


def log_partition_transfer(
    problem: InferenceProblem, max_frontier: int = DEFAULT_MAX_FRONTIER
) -> float:
    rows, w = _sweep_rows(problem, max_frontier)
    return _transfer_log_partition(problem.system, rows, w)


def marginal_transfer(
    problem: InferenceProblem, max_frontier: int = DEFAULT_MAX_FRONTIER
) -> np.ndarray:
    """Joint distribution of the query vertices via the row transfer sweep.

    Each query assignment is moved into the context and the rest of the free
    region is swept once; the query's own field and edge factors are added
    from :func:`log_weight`. Output layout matches :func:`marginal_brute`.
    """
    q = problem.system.q
    query = problem.query
    logs = []
    for spins in itertools.product(range(1, q + 1), repeat=len(query)):
        assign = dict(zip(query, spins))
        sub = problem.with_context(assign)
        own = log_weight(problem.system, assign, problem.context)
        if own == -math.inf:
            logs.append(-math.inf)
            continue
        rows, w = _sweep_rows(sub, max_frontier)
        logs.append(own + _transfer_log_partition(problem.system, rows, w))
    return _normalize(np.array(logs)).reshape((q,) * len(query))


def sample_exact(
    problem: InferenceProblem, rng, max_frontier: int = DEFAULT_MAX_FRONTIER
) -> dict:
    """Exact sample of the free region given the context, by the chain rule.

    Vertices are drawn one at a time in reading order, each from its exact
    conditional marginal given the context and the vertices drawn before it.
    One uniform from ``rng`` is consumed per vertex.
    """
    out: dict = {}
    for v in problem.ordered_free:
        sub = problem.with_context(out, query=(v,))
        p = marginal_transfer(sub, max_frontier)
        out[v] = pick(np.cumsum(p), rng.random()) + 1
    return out


def pick(cum: np.ndarray, y: float) -> int:
    """Index of the half-open interval of the cumulative vector containing ``y``.

    Values of ``y`` beyond the last cumulative entry (rounding) fall into the
    last interval with positive mass.
    """
    i = int(np.searchsorted(cum, y, side="right"))
    if i >= len(cum):
        i = len(cum) - 1
        while i > 0 and cum[i] == cum[i - 1]:
            i -= 1
    return i


def contract_legs(
    system: SpinSystem,
    free: Sequence[Vertex],
    context: Configuration,
    query: Vertex,
    legs: Sequence[Sequence[tuple[np.ndarray, Vertex]]],
) -> np.ndarray:
    """Unnormalized query weights for every joint index of some external legs.

    Leg ``j`` is a list of ``(M, w)`` pairs with ``w`` a free vertex; each pair
    multiplies the weight by ``M[r_j, spin(w) - 1]``, where ``r_j`` is the index
    carried by the leg. All weights are rescaled so that the largest field and
    interaction entries are 1.

    Returns:
        Array of shape ``(prod of leg sizes, q)``, leg indices in row-major order.
    """
    q = system.q
    order = sorted(free, key=reading_order)
    index = {v: k for k, v in enumerate(order)}
    A = system.A / float(system.A.max())
    b = system.b / float(system.b.max())
    operands = []
    for k, v in enumerate(order):
        f = b.copy()
        for w in neighbors(v):
            t = context.get(w)
            if t is not None:
                f = f * A[:, t - 1]
        operands += [f, [k]]
    for a, c in _free_edges(order):
        operands += [A, [a, c]]
    n = len(order)
    sizes = []
    for j, leg in enumerate(legs):
        size = None
        for M, w in leg:
            M = M / float(M.max())
            operands += [M, [n + j, index[w]]]
            size = M.shape[0]
        if size is None:
            raise ValueError(f"leg {j} touches no free vertex")
        sizes.append(size)
    out_labels = [n + j for j in range(len(legs))] + [index[query]]
    Z = opt_einsum.contract(*operands, out_labels, optimize="greedy")
    return np.asarray(Z).reshape(int(np.prod(sizes, dtype=np.int64)), q)


def conditional_table(
    system: SpinSystem,
    free: Sequence[Vertex],
    context: Configuration,
    query: Vertex,
    open_vertices: Sequence[Vertex],
) -> np.ndarray:
    """Conditional marginal of ``query`` for every assignment of ``open_vertices``.

    ``free`` is summed out given ``context``; each open vertex couples to its
    free neighbours only, since edges among open and context vertices do not
    change the conditional law of the free region. Open vertices with no free
    neighbour are allowed and simply repeat rows.

    Returns:
        Array of shape ``(q ** m, q)`` where row ``r`` corresponds to the open
        assignment whose base-q digits (most significant first, 0-based spins)
        spell ``r``. Rows of infeasible assignments are NaN.
    """
    q = system.q
    free_set = set(free)
    legs = []
    for u in open_vertices:
        attached = [w for w in neighbors(u) if w in free_set]
        legs.append([(system.A, w) for w in attached])
    live = [j for j, leg in enumerate(legs) if leg]
    Z = contract_legs(system, free, context, query, [legs[j] for j in live])
    m = len(open_vertices)
    if len(live) < m:
        # broadcast over open vertices that do not touch the free region
        shape = [q if j in live else 1 for j in range(m)] + [q]
        Z = np.broadcast_to(Z.reshape(shape), (q,) * m + (q,)).reshape(q**m, q)
    total = Z.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, Z / total, np.nan)
