import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_boxes, random_trackset
from trusteval import classic
from trusteval.assignment import greedy_match
from trusteval.geometry import ShapeError, ShapeSet, pairwise_distance
from trusteval.setmetrics import TrackSet, align, framewise_distances

BOX = (0.0, 0.0, 10.0, 10.0)


def single(box, score=None, cls=None):
    return ShapeSet.from_boxes([box], None if score is None else [score],
                               None if cls is None else [cls])


def tracks(rows):
    """``rows[label] = {time: box}`` on a window covering every time step."""
    times = sorted({t for r in rows.values() for t in r})
    window = np.arange(times[0], times[-1] + 1) if times else np.zeros(0, int)
    boxes = np.full((len(rows), len(window), 4), np.nan)
    for i, r in enumerate(rows.values()):
        for t, b in r.items():
            boxes[i, t - window[0]] = b
    return TrackSet(list(rows), boxes, window)


# ---------------------------------------------------------------------------
# F1


def test_f1_perfect_and_empty():
    X = ShapeSet.from_boxes(random_boxes(np.random.default_rng(0), 6))
    assert classic.f1_score(X, X)[0] == 1.0
    empty = ShapeSet.from_boxes(np.zeros((0, 4)))
    f1, counts = classic.f1_score(X, empty)
    assert f1 == 0.0 and counts.fn == 6


def test_f1_counts_by_hand():
    X = ShapeSet.from_boxes([BOX, (20, 20, 30, 30)])
    Y = ShapeSet.from_boxes([(1, 0, 11, 10), (60, 60, 70, 70), (61, 60, 71, 70)])
    f1, c = classic.f1_score(X, Y, 0.5)
    assert (c.tp, c.fp, c.fn) == (1, 2, 1)
    assert f1 == pytest.approx(2 * (1 / 3) * (1 / 2) / (1 / 3 + 1 / 2))


def test_f1_threshold_at_exact_boundary_is_accepted():
    # IoU exactly 0.5
    X, Y = single((0, 0, 10, 10)), single((0, 0, 10, 5))
    assert classic.f1_score(X, Y, 0.5)[0] == 1.0
    assert classic.f1_score(X, Y, 0.51)[0] == 0.0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_tp_count_never_increases_with_threshold(seed):
    rng = np.random.default_rng(seed)
    X = ShapeSet.from_boxes(random_boxes(rng, int(rng.integers(0, 6))))
    Y = ShapeSet.from_boxes(random_boxes(rng, int(rng.integers(0, 6))))
    tps = [classic.f1_score(X, Y, t)[1].tp for t in classic.IOU_FULL]
    assert all(a >= b for a, b in zip(tps, tps[1:]))


# ---------------------------------------------------------------------------
# AP


def ap_by_simulation(d, scores, max_distance, n_ref):
    """Re-run greedy matching from scratch at every score cutoff and integrate
    the precision envelope over the recall steps."""
    order = np.argsort(-scores, kind="stable")
    points = [(0.0, 1.0)]
    for k in range(1, len(order) + 1):
        keep = order[:k]
        m = greedy_match(d[:, keep].T, scores[keep], max_distance)
        tp = len(m)
        points.append((tp / n_ref, tp / k))
    ap = 0.0
    for (r0, _), k in zip(points[:-1], range(1, len(points))):
        r1 = points[k][0]
        env = max(p for r, p in points[k:])
        ap += (r1 - r0) * env
    return ap


def test_ap_matches_sweep_simulation(rng):
    for _ in range(200):
        m, n = rng.integers(1, 7, 2)
        X = ShapeSet.from_boxes(random_boxes(rng, m, hi=15))
        Y = ShapeSet.from_boxes(random_boxes(rng, n, hi=15), rng.uniform(0.05, 1, n))
        d = pairwise_distance(X, Y)
        assert classic.average_precision(X, Y, 0.5) == pytest.approx(
            ap_by_simulation(d, Y.scores, 0.5, m), abs=1e-12)


def test_ap_degenerate_single_pair():
    X = single(BOX)
    assert classic.average_precision(X, single((1, 0, 11, 10), 0.3)) == 1.0
    assert classic.average_precision(X, single((8, 0, 18, 10), 0.3)) == 0.0


def test_ap_requires_scores():
    with pytest.raises(ShapeError):
        classic.average_precision(single(BOX), single(BOX))


def test_ap_grid_interpolation_by_hand():
    # one hit then one miss at recall 1/2: envelope 1 up to recall 0.5
    X = ShapeSet.from_boxes([BOX, (50, 50, 60, 60)])
    Y = ShapeSet.from_boxes([BOX, (90, 90, 99, 99)], [0.9, 0.8])
    assert classic.average_precision(X, Y, interp="all-point") == 0.5
    assert classic.average_precision(X, Y, interp="grid") == pytest.approx(51 / 101)


def test_optimal_ap_recovers_what_greedy_loses():
    # greedy lets the top-scored prediction take r1, leaving p2 without a partner;
    # the augmented-distance assignment sends p1 to r2 and p2 to r1
    X = ShapeSet.from_boxes([(0, 0, 10, 10), (4, 0, 14, 10)])
    Y = ShapeSet.from_boxes([(1, 0, 11, 10), (-2, 0, 8, 10)], [0.9, 0.8])
    assert classic.average_precision(X, Y, assign="greedy") == 0.5
    assert classic.average_precision(X, Y, assign="optimal") == 1.0


def test_equal_scores_reproduce_f1_counts(rng):
    # unambiguous scenes: each reference has at most one feasible prediction
    for _ in range(50):
        refs = np.array([[40.0 * i, 0, 40.0 * i + 20, 20] for i in range(6)])
        keep = rng.random(6) < 0.7
        preds = refs[keep] + rng.uniform(-6, 6, (int(keep.sum()), 1)) * [1, 0, 1, 0]
        false = np.array([[40.0 * i + 5, 200, 40.0 * i + 25, 220] for i in range(rng.integers(0, 3))])
        Y_boxes = np.vstack([preds, false.reshape(-1, 4)])
        X = ShapeSet.from_boxes(refs)
        Y = ShapeSet.from_boxes(Y_boxes, np.full(len(Y_boxes), 0.5))
        _, c = classic.f1_score(X, Y, 0.5)
        for assign in ("greedy", "optimal"):
            sweep = classic.detection_sweep(X, Y, 0.5, assign=assign)
            assert (sweep.tp[-1], sweep.fp[-1], sweep.n_ref - sweep.tp[-1]) == (c.tp, c.fp, c.fn)


def test_mean_ap_over_classes():
    X = ShapeSet.from_boxes([BOX, (50, 50, 60, 60)], classes=[1, 2])
    Y = ShapeSet.from_boxes([BOX, (80, 80, 90, 90)], [0.9, 0.9], [1, 2])
    assert classic.mean_ap(X, Y) == 0.5
    assert classic.mean_ap(X, Y, classes=[1]) == classic.average_precision(X.of_class(1), Y.of_class(1))
    assert classic.mean_ap(X, Y, thresholds=classic.IOU_PARTIAL) == 0.5


def test_mean_ap_pools_images():
    refs = [single(BOX), single(BOX)]
    preds = [single(BOX, 0.9), single((30, 30, 40, 40), 0.8)]
    assert classic.mean_ap(refs, preds) == 0.5


def test_log_amr_extremes():
    X = ShapeSet.from_boxes([BOX, (30, 0, 40, 10)])
    perfect = ShapeSet.from_boxes([BOX, (30, 0, 40, 10)], [0.9, 0.8])
    assert classic.log_amr(X, perfect) == 0.0
    misses = ShapeSet.from_boxes([(80, 80, 90, 90)], [0.5])
    assert classic.log_amr(X, misses) == 1.0


def test_log_amr_by_hand():
    # one hit at fppi 0, then one false positive: miss rate 1/2 everywhere
    X = ShapeSet.from_boxes([BOX, (30, 0, 40, 10)])
    Y = ShapeSet.from_boxes([BOX, (80, 80, 90, 90)], [0.9, 0.8])
    assert classic.log_amr(X, Y) == pytest.approx(0.5)


def test_log_amr_floor_applies_to_mixed_samples():
    sweep = classic.Sweep(np.array([1, 1]), np.array([0, 1]), 1, 100)
    # miss rate 0 from the start: every sample is zero
    assert classic.log_amr_from_sweep(sweep) == 0.0
    sweep = classic.Sweep(np.array([0, 1]), np.array([1, 1]), 1, 10)
    # fppi 0.1 after the first false positive; grid points below 0.1 keep miss 1
    grid = np.logspace(-2, 0, 9)
    below = int((grid < 0.1 - 1e-12).sum())
    expected = np.exp((9 - below) * np.log(1e-4) / 9)
    assert classic.log_amr_from_sweep(sweep) == pytest.approx(expected)


# ---------------------------------------------------------------------------
# tracking


def test_mota_perfect_empty_and_zero_gt():
    F = tracks({1: {1: BOX, 2: BOX}, 2: {2: (30, 0, 40, 10)}})
    assert classic.mota(F, F)[0] == 1.0
    assert classic.mota(F, TrackSet.empty(F.times))[0] == 0.0
    with pytest.raises(ValueError):
        classic.mota(TrackSet.empty([1]), F)


def test_mota_counts_identity_switch():
    shifted = (30, 0, 40, 10)
    F = tracks({1: {1: BOX, 2: BOX, 3: BOX}})
    G = tracks({7: {1: BOX, 2: BOX}, 8: {3: BOX}, 9: {1: shifted}})
    score, c = classic.mota(F, G)
    assert c.idsw.tolist() == [0, 0, 1]
    assert c.fp.tolist() == [1, 0, 0]
    assert score == pytest.approx(1 - 2 / 3)


def test_mota_keeps_previous_match_while_feasible():
    # at t=2 prediction 8 is closer, but 7 is still within threshold
    F = tracks({1: {1: BOX, 2: BOX}})
    G = tracks({7: {1: BOX, 2: (2, 0, 12, 10)}, 8: {2: BOX}})
    c = classic.clear_counts(F, G)
    assert c.idsw.sum() == 0


def idf1_by_enumeration(F, G, threshold=0.5):
    F, G = align(F, G)
    hit = np.nan_to_num(framewise_distances(F, G), nan=2.0) <= 1 - threshold + 1e-9
    overlap = hit.sum(axis=2)
    n, m = len(F), len(G)
    best = 0
    for k in range(min(n, m) + 1):
        for rows in itertools.combinations(range(n), k):
            for cols in itertools.permutations(range(m), k):
                best = max(best, sum(overlap[r, c] for r, c in zip(rows, cols)))
    total = F.present.sum() + G.present.sum()
    return 2 * best / total


def test_idf1_crossed_identities():
    a, b = BOX, (30, 0, 40, 10)
    F = tracks({1: {1: a, 2: a, 3: a, 4: a}, 2: {1: b, 2: b, 3: b, 4: b}})
    G = tracks({5: {1: a, 2: a, 3: b, 4: b}, 6: {1: b, 2: b, 3: a, 4: a}})
    assert classic.idf1(F, G) == pytest.approx(idf1_by_enumeration(F, G)) == pytest.approx(0.5)


def test_idf1_matches_enumeration(rng):
    for _ in range(60):
        F = random_trackset(rng, int(rng.integers(1, 4)), 4, hi=8)
        G = random_trackset(rng, int(rng.integers(1, 4)), 4, hi=8)
        assert classic.idf1(F, G) == pytest.approx(idf1_by_enumeration(F, G), abs=1e-12)


def test_idf1_perfect_and_empty():
    F = tracks({1: {1: BOX, 2: BOX}})
    assert classic.idf1(F, F) == 1.0
    assert classic.idf1(F, TrackSet.empty(F.times)) == 0.0


def test_hota_by_hand():
    F = tracks({1: {1: BOX, 2: BOX, 3: BOX, 4: BOX}})
    half = tracks({9: {1: BOX, 2: BOX}})
    # TP 2, FN 2, A = 2 / (4 + 2 - 2)
    assert classic.hota(F, half) == pytest.approx(np.sqrt(2 * 0.5 / 4))
    split = tracks({1: {1: BOX, 2: BOX}, 2: {3: BOX, 4: BOX}})
    whole = tracks({9: {1: BOX, 2: BOX, 3: BOX, 4: BOX}})
    assert classic.hota(split, whole) == pytest.approx(np.sqrt(0.5))


def test_hota_perfect_empty_and_marginal(rng):
    F = random_trackset(rng, 3, 5)
    assert all(classic._hota_value(*t) == pytest.approx(1.0)
               for t in classic.hota_terms(F, F, classic.HOTA_ALPHAS))
    assert classic.hota_marginal(F, F) == pytest.approx(1.0)
    assert classic.hota(F, TrackSet.empty(F.times)) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_tracking_scores_are_bounded(seed):
    rng = np.random.default_rng(seed)
    F = random_trackset(rng, int(rng.integers(1, 4)), 5, hi=10)
    G = random_trackset(rng, int(rng.integers(1, 4)), 5, hi=10)
    assert classic.mota(F, G)[0] <= 1.0
    assert 0.0 <= classic.idf1(F, G) <= 1.0
    assert 0.0 <= classic.hota(F, G) <= 1.0 + 1e-12
