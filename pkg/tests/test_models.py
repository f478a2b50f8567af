import math
import random

import numpy as np
import pytest

from lazyspin.geometry import Box, graph_boundary
from lazyspin.inference import InferenceProblem, marginal_brute
from lazyspin.lazy import RecursionTrace, TraceNode
from lazyspin.models import (
    bracket_bounds,
    branching_stats,
    chi_square_gof,
    ising,
    potts,
    potts_critical_beta,
    random_oracle_instances,
    tv_distance,
    wsm_probe,
)

# centre P(spin 2) on the 9x9 box, Ising beta=0.3, h=1.5, all-1 / all-2 boundary
BRACKET_LO = 0.69135747957714355
BRACKET_HI = 0.69199089524003199

# exact centre TV between all-1 and all-2 boundaries, Ising beta=0.3, h=1
PROBE_ISING_03 = (
    0.14183948891386094,
    0.030898681108783632,
    0.0063912196571164759,
    0.0012992418388105831,
)


class TestConstructors:
    def test_potts(self):
        np.testing.assert_array_equal(potts(2, 0.0).A, np.ones((2, 2)))
        assert potts(3, 1.0).A[1, 1] == pytest.approx(math.e)
        assert potts(3, 1.0).A[0, 1] == 1.0
        s = potts(4, 0.3)
        assert s.soft_row == 1 and s.strictly_positive
        with pytest.raises(ValueError):
            potts(3, -0.1)

    def test_critical_points(self):
        assert potts_critical_beta(3) == pytest.approx(1.0050525, abs=1e-7)
        assert potts_critical_beta(2) == pytest.approx(0.8814, abs=1e-4)

    def test_ising(self):
        s = ising(0.5, 2.0)
        assert s.monotone_eligible
        np.testing.assert_array_equal(s.b, [1.0, 2.0])
        p = marginal_brute(InferenceProblem(s, {(0, 0)}, {}, ((0, 0),), free_boundary=True))
        assert p[1] == pytest.approx(2 / 3, abs=1e-15)
        p = marginal_brute(InferenceProblem(ising(0.0), {(0, 0)}, {}, ((0, 0),), free_boundary=True))
        np.testing.assert_allclose(p, [0.5, 0.5])
        with pytest.raises(ValueError):
            ising(0.5, 0.0)
        with pytest.raises(ValueError):
            ising(-1.0)

    def test_potts_two_equals_ising(self):
        rng = np.random.default_rng(2)
        box = Box(0, 0, 2, 2)
        for beta in (0.0, 0.4, 1.1):
            ctx = {v: int(rng.integers(1, 3)) for v in graph_boundary(box)}
            query = ((1, 1), (0, 2))
            a = marginal_brute(InferenceProblem(potts(2, beta), set(box), ctx, query))
            b = marginal_brute(InferenceProblem(ising(beta, 1.0), set(box), ctx, query))
            np.testing.assert_allclose(a, b, atol=1e-12)


class TestDistances:
    def test_tv(self):
        assert tv_distance([0.3, 0.7], [0.3, 0.7]) == 0.0
        assert tv_distance([1, 0], [0, 1]) == 1.0
        assert tv_distance([0.6, 0.4], [0.5, 0.5]) == pytest.approx(0.1)
        with pytest.raises(ValueError):
            tv_distance([0.5, 0.5], [1 / 3] * 3)

    def test_chi_square(self):
        assert chi_square_gof([50, 50], [0.5, 0.5]) == 0.0
        assert chi_square_gof([60, 40], [0.5, 0.5]) == pytest.approx(4.0)
        assert chi_square_gof([30, 30, 40], [1 / 3] * 3) == pytest.approx(2.0)
        with pytest.raises(ValueError):
            chi_square_gof([1, 2], [1.0, 0.0])
        with pytest.raises(ValueError):
            chi_square_gof([0, 0], [0.5, 0.5])


class TestProbe:
    def test_subcritical_decay(self):
        t = wsm_probe(ising(0.3), [2, 3, 4, 5])
        np.testing.assert_allclose(t.tv, PROBE_ISING_03, rtol=1e-10)
        assert all(a > b for a, b in zip(t.tv, t.tv[1:]))
        assert t.log_slope() < 0

    def test_beta_zero(self):
        t = wsm_probe(potts(3, 0.0), [2, 3, 4])
        assert t.tv == [0.0, 0.0, 0.0]

    def test_supercritical_control_stays_large(self):
        t = wsm_probe(potts(2, 1.2), [2, 3, 4, 5])
        assert min(t.tv) > 0.5

    def test_boundary_swap_symmetry(self):
        a = wsm_probe(potts(3, 0.6), [2, 3], boundary_spins=(1, 3))
        b = wsm_probe(potts(3, 0.6), [2, 3], boundary_spins=(3, 1))
        np.testing.assert_allclose(a.tv, b.tv, atol=1e-14)

    def test_block_target(self):
        t = wsm_probe(ising(0.3), [2, 3], target_radius=1)
        assert 0 < t.tv[1] < t.tv[0] <= 1

    def test_rejects_bad_scales(self):
        with pytest.raises(ValueError):
            wsm_probe(ising(0.3), [3, 2])
        with pytest.raises(ValueError):
            wsm_probe(ising(0.3), [1], target_radius=1)


class TestBracket:
    def test_field_free_and_field(self):
        assert bracket_bounds(ising(0.0, 1.0), 2) == pytest.approx((0.5, 0.5), abs=1e-14)
        assert bracket_bounds(ising(0.0, 2.0), 2) == pytest.approx((2 / 3, 2 / 3), abs=1e-14)

    def test_regression(self):
        lo, hi = bracket_bounds(ising(0.3, 1.5), 4)
        assert lo == pytest.approx(BRACKET_LO, abs=1e-13)
        assert hi == pytest.approx(BRACKET_HI, abs=1e-13)
        assert 0 <= lo <= hi <= 1

    def test_bracket_tightens_with_box(self):
        s = ising(0.4, 1.2)
        prev_lo, prev_hi = bracket_bounds(s, 1)
        for half in (2, 3):
            lo, hi = bracket_bounds(s, half)
            assert prev_lo <= lo <= hi <= prev_hi
            prev_lo, prev_hi = lo, hi

    def test_rejects_non_monotone(self):
        with pytest.raises(ValueError):
            bracket_bounds(potts(3, 0.5), 2)


def star_trace(children):
    nodes = [TraceNode((0, 0), -1, 0, decided=children == 0, spin=1, children=children)]
    nodes += [TraceNode((k, 0), 0, 1, spin=1) for k in range(children)]
    return RecursionTrace(nodes)


class TestBranching:
    def test_single_nodes(self):
        s = branching_stats([star_trace(0) for _ in range(5)])
        assert s.runs == 5 and s.mean_calls == 1.0
        assert s.indecision_frequency == 0.0 and s.max_depth == 0

    def test_one_full_recursion(self):
        s = branching_stats([star_trace(12)])
        assert s.mean_calls == 13
        assert s.max_depth == 1
        assert s.indecision_frequency == pytest.approx(1 / 13)
        assert s.tail(12) == 1.0 and s.tail(13) == 0.0

    def test_order_invariant(self):
        traces = [star_trace(k % 4) for k in range(20)]
        shuffled = list(traces)
        random.Random(1).shuffle(shuffled)
        assert branching_stats(traces) == branching_stats(shuffled)

    def test_empty(self):
        with pytest.raises(ValueError):
            branching_stats([])


def test_random_oracle_instances_are_reproducible():
    a = random_oracle_instances(5, seed=3)
    b = random_oracle_instances(5, seed=3)
    for x, y in zip(a, b):
        assert x.problem.free == y.problem.free
        assert x.problem.context == y.problem.context
        assert x.problem.query == y.problem.query
        assert (x.q, x.beta, x.h) == (y.q, y.beta, y.h)
