import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trusteval.ranking import (
    avg_rank_distortion,
    avg_rank_sensitivity,
    avg_rank_switches,
    kendall_tau_normalized,
    ranks_from_scores,
    reliability,
)


def kendall_by_pairs(a, b):
    pairs = list(itertools.combinations(range(len(a)), 2))
    bad = sum((a[i] - a[j]) * (b[i] - b[j]) < 0 for i, j in pairs)
    return bad / len(pairs)


def test_ranks_by_direction_and_ties():
    assert ranks_from_scores([0.2, 0.9, 0.5]).tolist() == [3, 1, 2]
    assert ranks_from_scores([0.2, 0.9, 0.5], "lower-better").tolist() == [1, 3, 2]
    # equal scores fall back to position
    assert ranks_from_scores([0.5, 0.5, 0.1], "lower-better").tolist() == [2, 3, 1]


@pytest.mark.parametrize("bad", [[], [np.nan, 1.0], [np.inf]])
def test_ranks_reject_bad_scores(bad):
    with pytest.raises(ValueError):
        ranks_from_scores(bad)


def test_kendall_extremes():
    assert kendall_tau_normalized([1, 2, 3, 4], [1, 2, 3, 4]) == 0.0
    assert kendall_tau_normalized([1, 2, 3, 4], [4, 3, 2, 1]) == 1.0
    assert kendall_tau_normalized([1, 2, 3], [2, 1, 3]) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        kendall_tau_normalized([1], [1])


def test_kendall_matches_pair_count(rng):
    for _ in range(300):
        k = int(rng.integers(2, 12))
        a, b = rng.permutation(k) + 1, rng.permutation(k) + 1
        assert kendall_tau_normalized(a, b) == kendall_by_pairs(a, b)


def test_reliability_constant_ranks_is_zero():
    R = np.array([[1, 1, 1], [2, 2, 2], [3, 3, 3]])
    assert reliability(R, [0.1, 0.2, 0.3]) == {"switches": 0.0, "distortion": 0.0, "sensitivity": 0.0}


def test_reliability_by_hand():
    R = np.array([[1, 2, 1], [2, 1, 2]])
    assert avg_rank_switches(R) == 1.0
    assert avg_rank_distortion(R) == pytest.approx(np.std([1, 2, 1]))
    # four unit changes over spacing 0.1, (m - 1) K = 4
    assert avg_rank_sensitivity(R, [0.1, 0.2, 0.3]) == pytest.approx(4 / 0.1 / 4)
    assert avg_rank_sensitivity(R, evenly_spaced=True) == pytest.approx(1.0)


def test_sensitivity_needs_increasing_thresholds():
    R = np.array([[1, 2], [2, 1]])
    with pytest.raises(ValueError):
        avg_rank_sensitivity(R, [0.2, 0.1])
    with pytest.raises(ValueError):
        avg_rank_sensitivity(R)
    with pytest.raises(ValueError):
        avg_rank_sensitivity(R[:, :1], evenly_spaced=True)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=9))
def test_ranks_are_a_permutation_and_reverse_with_direction(scores):
    hi = ranks_from_scores(scores)
    lo = ranks_from_scores(scores, "lower-better")
    assert sorted(hi.tolist()) == list(range(1, len(scores) + 1))
    if len(set(scores)) == len(scores):
        assert (hi + lo).tolist() == [len(scores) + 1] * len(scores)


@settings(max_examples=200, deadline=None)
@given(st.permutations(range(7)), st.permutations(range(7)), st.permutations(range(7)))
def test_kendall_is_a_metric_on_permutations(a, b, c):
    a, b, c = (np.array(x) for x in (a, b, c))
    assert kendall_tau_normalized(a, b) == kendall_tau_normalized(b, a)
    assert kendall_tau_normalized(a, c) <= kendall_tau_normalized(a, b) + kendall_tau_normalized(b, c) + 1e-12
