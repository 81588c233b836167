import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import linprog

from conftest import brute_force_assignment
from trusteval.assignment import (
    greedy_match,
    max_cardinality_matching,
    solve_assignment,
    solve_transport,
    thresholded_matching,
)


def lp_transport(c):
    """Oracle: the same transport problem as a dense LP solved by HiGHS."""
    m, n = c.shape
    A = []
    for i in range(m):
        row = np.zeros((m, n)); row[i] = 1; A.append(row.ravel())
    for j in range(n):
        col = np.zeros((m, n)); col[:, j] = 1; A.append(col.ravel())
    b = [1 / m] * m + [1 / n] * n
    res = linprog(c.ravel(), A_eq=np.array(A), b_eq=b, bounds=(0, None), method="highs")
    return res.fun


def replicated_assignment(c):
    """Oracle: uniform transport equals assignment on an lcm-replicated matrix."""
    m, n = c.shape
    L = np.lcm(m, n)
    big = np.repeat(np.repeat(c, L // m, axis=0), L // n, axis=1)
    return brute_force_assignment(big) / L if L <= 6 else solve_assignment(big)[1] / L


def test_square_assignment_by_hand():
    c = np.array([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]])
    match, cost = solve_assignment(c)
    assert cost == 5.0
    assert match.pairs == [(0, 1), (1, 0), (2, 2)]


def test_rectangular_assignment_leaves_rows_unmatched():
    c = np.array([[0.1], [0.0], [0.5]])
    match, cost = solve_assignment(c)
    assert match.pairs == [(1, 0)]
    assert match.unmatched_rows == [0, 2]
    assert cost == 0.0


def test_empty_assignment():
    match, cost = solve_assignment(np.zeros((0, 3)))
    assert len(match) == 0 and cost == 0.0 and match.unmatched_cols == [0, 1, 2]


@pytest.mark.parametrize("shape", [(1, 1), (2, 3), (4, 4), (5, 3), (6, 6)])
def test_assignment_matches_enumeration(rng, shape):
    for _ in range(40):
        c = rng.random(shape)
        _, cost = solve_assignment(c)
        assert cost == pytest.approx(brute_force_assignment(c), abs=1e-9)


def test_thresholded_matching_prefers_cardinality():
    # the cheapest single pair (0,0) would block two feasible pairs
    c = np.array([[0.0, 0.4], [0.4, 0.9]])
    m = thresholded_matching(c, 0.5)
    assert m.pairs == [(0, 1), (1, 0)]


def test_max_cardinality_matches_enumeration(rng):
    for _ in range(200):
        m, n = rng.integers(1, 5, 2)
        c = rng.random((m, n))
        feas = rng.random((m, n)) < 0.5
        got = max_cardinality_matching(c, feas)
        best = (0, 0.0)
        for k in range(min(m, n) + 1):
            for rows in itertools.combinations(range(m), k):
                for cols in itertools.permutations(range(n), k):
                    if all(feas[r, q] for r, q in zip(rows, cols)):
                        cand = (k, -sum(c[r, q] for r, q in zip(rows, cols)))
                        best = max(best, cand)
        assert len(got) == best[0]
        assert -sum(c[i, j] for i, j in got.pairs) == pytest.approx(best[1], abs=1e-9)


def test_greedy_match_follows_priority():
    c = np.array([[0.1, 0.2], [0.05, 0.6]])
    # row 0 first takes column 0 even though row 1 prefers it
    assert greedy_match(c, [0.9, 0.5], 0.5).pairs == [(0, 0)]
    assert greedy_match(c, [0.5, 0.9], 0.5).pairs == [(0, 1), (1, 0)]


def test_optimal_cost_never_exceeds_greedy_on_same_pairs(rng):
    for _ in range(200):
        c = rng.random((4, 5))
        g = greedy_match(c, rng.random(4), 1.0)
        opt = max_cardinality_matching(c, np.ones_like(c, bool))
        assert len(opt) >= len(g)
        if len(opt) == len(g):
            assert sum(c[p] for p in opt.pairs) <= sum(c[p] for p in g.pairs) + 1e-12


def test_transport_single_row_is_forced():
    plan, cost = solve_transport(np.array([[1.0, 3.0]]))
    assert cost == 2.0
    np.testing.assert_allclose(plan.plan, [[0.5, 0.5]])


def test_transport_rejects_empty():
    with pytest.raises(ValueError):
        solve_transport(np.zeros((0, 2)))


def test_transport_matches_two_oracles(rng):
    for _ in range(100):
        m, n = rng.integers(1, 6, 2)
        c = rng.random((m, n))
        plan, cost = solve_transport(c)
        np.testing.assert_allclose(plan.row_sums, 1 / m, atol=1e-12)
        np.testing.assert_allclose(plan.col_sums, 1 / n, atol=1e-12)
        assert cost == pytest.approx(lp_transport(c), abs=1e-9)
        if np.lcm(m, n) <= 6:
            assert cost == pytest.approx(replicated_assignment(c), abs=1e-9)


def test_square_transport_equals_assignment_mean(rng):
    for _ in range(100):
        n = int(rng.integers(1, 7))
        c = rng.random((n, n))
        assert solve_transport(c)[1] == pytest.approx(solve_assignment(c)[1] / n, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 5), st.integers(1, 5)),
              elements=st.floats(0, 1, allow_nan=False)))
def test_assignment_size_is_min_dimension(c):
    match, cost = solve_assignment(c)
    assert len(match) == min(c.shape)
    assert len(set(match.rows)) == len(match) == len(set(match.cols))
    assert cost == pytest.approx(sum(c[p] for p in match.pairs))
