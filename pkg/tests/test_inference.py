import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_joint

from lazyspin.errors import CapExceeded, InfeasibleError
from lazyspin.geometry import Box, graph_boundary
from lazyspin.inference import (
    InferenceProblem,
    conditional_table,
    log_partition_brute,
    log_partition_transfer,
    marginal_brute,
    marginal_transfer,
    sample_exact,
)
from lazyspin.models import chi_square_gof, ising, potts, random_oracle_instances
from lazyspin.rng import stream
from lazyspin.spins import new_spin_system

# centre P(spin 1) of the 3x3 box under an all-1 ring, Ising beta=0.5, h=1;
# computed by plain enumeration of the 512 interior configurations
CENTRE_3X3_ALL_ONE = 0.71551998194064387

NEAR_ONE = math.e**2 / (math.e**2 + 1)


def ring(box, spin):
    return {v: spin for v in graph_boundary(box)}


def both(problem):
    return marginal_brute(problem), marginal_transfer(problem)


class TestPartition:
    def test_isolated_vertex(self):
        p = InferenceProblem(ising(0.9), {(0, 0)}, {}, free_boundary=True)
        assert log_partition_brute(p) == pytest.approx(math.log(2))
        assert log_partition_transfer(p) == pytest.approx(math.log(2))

    @pytest.mark.parametrize("beta,expected", [(0.0, math.log(4)), (1.0, math.log(2 * math.e + 2))])
    def test_single_edge(self, beta, expected):
        p = InferenceProblem(ising(beta), {(0, 0), (1, 0)}, {}, free_boundary=True)
        assert log_partition_brute(p) == pytest.approx(expected, abs=1e-14)
        assert log_partition_transfer(p) == pytest.approx(expected, abs=1e-14)

    def test_infeasible_is_minus_inf(self):
        s = new_spin_system(2, [1, 1], [[0, 1], [1, 0]])
        # a free vertex between two neighbours of different spins in an
        # antiferromagnetic hard-core system has no valid spin
        p = InferenceProblem(s, {(0, 0)}, {(1, 0): 1, (-1, 0): 2}, free_boundary=True)
        assert log_partition_brute(p) == -math.inf
        assert log_partition_transfer(p) == -math.inf

    def test_cap(self):
        p = InferenceProblem(ising(0.1), set(Box(0, 0, 4, 4)), {}, free_boundary=True)
        with pytest.raises(CapExceeded):
            log_partition_brute(p, max_states=2**10)
        with pytest.raises(CapExceeded):
            log_partition_transfer(p, max_frontier=2**4)

    def test_large_beta_no_overflow(self):
        box = Box(0, 0, 3, 3)
        p = InferenceProblem(ising(30.0), set(box), ring(box, 1))
        assert np.isfinite(log_partition_transfer(p))
        assert log_partition_transfer(p) == pytest.approx(log_partition_brute(p), rel=1e-12)


class TestMarginals:
    def test_four_neighbours(self):
        ctx = {(1, 0): 1, (-1, 0): 1, (0, 1): 1, (0, -1): 1}
        p = InferenceProblem(ising(0.5), {(0, 0)}, ctx, ((0, 0),))
        for m in both(p):
            assert m[0] == pytest.approx(NEAR_ONE, abs=1e-14)

    def test_centre_of_3x3(self, oracle):
        box = Box(1, 1, 3, 3)
        p = InferenceProblem(ising(0.5), set(box), ring(box, 1), ((2, 2),))
        ref = oracle(ising(0.5), set(box), ring(box, 1), [(2, 2)])
        assert ref[0] == pytest.approx(CENTRE_3X3_ALL_ONE, abs=1e-14)
        for m in both(p):
            assert m[0] == pytest.approx(CENTRE_3X3_ALL_ONE, abs=1e-13)

    @pytest.mark.parametrize("q", [2, 3])
    def test_beta_zero_is_product(self, q):
        b = np.arange(1, q + 1, dtype=float)
        s = new_spin_system(q, b, np.ones((q, q)))
        box = Box(0, 0, 2, 1)
        query = ((0, 0), (2, 1))
        p = InferenceProblem(s, set(box), ring(box, 1), query)
        expect = np.outer(b, b) / b.sum() ** 2
        for m in both(p):
            np.testing.assert_allclose(m, expect, atol=1e-14)

    def test_empty_free_region(self):
        p = InferenceProblem(ising(0.5), set(), {(0, 0): 1})
        assert marginal_transfer(p).shape == ()
        assert float(marginal_transfer(p)) == 1.0
        assert float(marginal_brute(p)) == 1.0

    def test_joint_layout_matches_oracle(self, oracle):
        s = potts(3, 0.8)
        box = Box(0, 0, 2, 2)
        ctx = {v: 1 + (v[0] + 2 * v[1]) % 3 for v in graph_boundary(box)}
        query = ((0, 2), (2, 0))
        p = InferenceProblem(s, set(box), ctx, query)
        ref = oracle(s, set(box), ctx, p.query)
        for m in both(p):
            np.testing.assert_allclose(m, ref, atol=1e-13)
            assert m.sum() == pytest.approx(1.0, abs=1e-12)

    def test_fixed_cell_inside_rectangle(self, oracle):
        s = ising(0.7, 1.4)
        box = Box(0, 0, 3, 3)
        ctx = ring(box, 2)
        ctx[(1, 2)] = 1
        ctx[(2, 1)] = 1
        free = set(box) - {(1, 2), (2, 1)}
        p = InferenceProblem(s, free, ctx, ((0, 0), (3, 3)))
        ref = oracle(s, free, ctx, p.query)
        for m in both(p):
            np.testing.assert_allclose(m, ref, atol=1e-12)

    def test_infeasible_raises(self):
        s = new_spin_system(2, [1, 1], [[0, 1], [1, 0]])
        p = InferenceProblem(s, {(0, 0)}, {(1, 0): 1, (-1, 0): 2}, ((0, 0),), free_boundary=True)
        with pytest.raises(InfeasibleError):
            marginal_brute(p)
        with pytest.raises(InfeasibleError):
            marginal_transfer(p)

    def test_requires_boundary(self):
        with pytest.raises(ValueError):
            InferenceProblem(ising(0.5), {(0, 0)}, {(1, 0): 1})

    def test_query_must_be_free(self):
        with pytest.raises(ValueError):
            InferenceProblem(ising(0.5), {(0, 0)}, {}, ((1, 1),), free_boundary=True)

    def test_gibbs_screening(self):
        s = ising(0.6, 0.8)
        box = Box(0, 0, 2, 2)
        ctx = ring(box, 1)
        base = marginal_brute(InferenceProblem(s, set(box), ctx, ((1, 1),)))
        far = dict(ctx)
        far.update({(-3, 0): 2, (5, 5): 2, (1, -4): 1})
        moved = marginal_brute(InferenceProblem(s, set(box), far, ((1, 1),)))
        np.testing.assert_allclose(base, moved, atol=1e-12)

    def test_chain_rule_reproduces_joint(self):
        s = potts(3, 0.9)
        box = Box(0, 0, 1, 1)
        ctx = {v: 1 + (v[0] * 7 + v[1]) % 3 for v in graph_boundary(box)}
        problem = InferenceProblem(s, set(box), ctx, tuple(box))
        joint = marginal_brute(problem)
        order = list(box)
        for spins in itertools.product(range(1, 4), repeat=4):
            prob, fixed = 1.0, {}
            for v, x in zip(order, spins):
                sub = problem.with_context(fixed, query=(v,))
                prob *= marginal_transfer(sub)[x - 1]
                fixed[v] = x
            assert prob == pytest.approx(joint[tuple(x - 1 for x in spins)], abs=1e-12)

    def test_oracle_suite_small(self):
        for inst in random_oracle_instances(30, seed=11):
            a, b = both(inst.problem)
            assert np.abs(a - b).max() <= 1e-10

    @settings(max_examples=25, deadline=None)
    @given(
        st.integers(1, 4), st.integers(1, 4), st.floats(0, 1.5), st.floats(0.5, 2.0),
        st.integers(0, 2**32 - 1),
    )
    def test_transfer_matches_independent_oracle(self, w, h, beta, field, seed):
        rng = np.random.default_rng(seed)
        s = ising(beta, field)
        box = Box(0, 0, w - 1, h - 1)
        ctx = {v: int(rng.integers(1, 3)) for v in graph_boundary(box) if rng.random() < 0.8}
        cells = list(box)
        query = (cells[int(rng.integers(len(cells)))],)
        p = InferenceProblem(s, set(box), ctx, query, free_boundary=True)
        np.testing.assert_allclose(marginal_transfer(p), naive_joint(s, set(box), ctx, query), atol=1e-12)


class TestConditionalTable:
    def test_rows_match_per_assignment_marginals(self):
        s = potts(3, 0.6)
        box = Box(0, 0, 1, 1)
        open_v = [(-1, 0), (2, 1), (5, 5)]
        ctx = {v: 2 for v in graph_boundary(box) if v not in open_v}
        table = conditional_table(s, list(box), ctx, (0, 0), open_v)
        assert table.shape == (27, 3)
        for r, spins in enumerate(itertools.product(range(1, 4), repeat=3)):
            full = dict(ctx)
            full.update((u, x) for u, x in zip(open_v, spins) if u != (5, 5))
            m = marginal_brute(InferenceProblem(s, set(box), full, ((0, 0),)))
            np.testing.assert_allclose(table[r], m, atol=1e-13)


class TestSampleExact:
    def test_uniform_at_beta_zero(self):
        s = potts(2, 0.0)
        box = Box(0, 0, 1, 1)
        p = InferenceProblem(s, set(box), ring(box, 1))
        rng = stream(3)
        order = list(box)
        counts = np.zeros(16)
        n = 20000
        for _ in range(n):
            out = sample_exact(p, rng)
            k = 0
            for v in order:
                k = 2 * k + out[v] - 1
            counts[k] += 1
        # chi-square with 15 dof: upper 1e-3 point is 37.70
        assert chi_square_gof(counts, np.full(16, 1 / 16)) < 37.70

    def test_single_vertex_frequency(self):
        ctx = {(1, 0): 1, (-1, 0): 1, (0, 1): 1, (0, -1): 1}
        p = InferenceProblem(ising(0.5), {(0, 0)}, ctx)
        rng = stream(5)
        n = 20000
        hits = sum(sample_exact(p, rng)[(0, 0)] == 1 for _ in range(n))
        sigma = math.sqrt(NEAR_ONE * (1 - NEAR_ONE) / n)
        assert abs(hits / n - NEAR_ONE) < 3 * sigma

    def test_deterministic(self):
        box = Box(0, 0, 2, 2)
        p = InferenceProblem(potts(3, 0.7), set(box), ring(box, 3))
        assert sample_exact(p, stream(9)) == sample_exact(p, stream(9))
