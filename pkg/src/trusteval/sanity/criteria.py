"""Criteria as functions of precomputed per-prediction distance data.

A context object computes every distance matrix once per (reference,
prediction) pair; each criterion then reads from it, so sweeping many
criteria over a threshold grid costs only the matching itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import classic
from ..geometry import ShapeSet, augmented_base, distance_threshold, pairwise_distance, plain_base
from ..setmetrics import (
    TrackSet,
    align,
    emd_from_distances,
    framewise_distances,
    hausdorff_from_distances,
    ospa_from_distances,
    track_distances_from_framewise,
)

TASKS = ("detect-single", "detect-multi", "track")


@dataclass(frozen=True)
class Criterion:
    name: str
    tasks: tuple[str, ...]
    higher_better: bool
    thresholded: bool
    fn: Callable
    needs_scores: bool = False

    @property
    def direction(self) -> str:
        return "higher-better" if self.higher_better else "lower-better"


# ---------------------------------------------------------------------------
# detection


class DetectionContext:
    """Distance matrices between one reference image and each prediction."""

    def __init__(self, reference: ShapeSet, predictions: list[ShapeSet], base: str = "iou",
                 augmented: bool = False):
        self.reference = reference
        self.predictions = predictions
        self.base = base
        self.d = [pairwise_distance(reference, p, plain_base(base)) for p in predictions]
        self.d_aug = ([pairwise_distance(reference, p, augmented_base(base)) for p in predictions]
                      if augmented else None)
        self._groups: dict = {}

    def class_groups(self, k: int, union: bool = True) -> list[tuple[np.ndarray, np.ndarray]]:
        """Row/column index pairs per class, over the classes of both sides
        (``union``) or those of the reference only."""
        key = (k, union)
        if key not in self._groups:
            rc = self.reference.classes
            pc = self.predictions[k].classes
            ids = np.union1d(rc, pc) if union else np.unique(rc)
            self._groups[key] = [(np.flatnonzero(rc == c), np.flatnonzero(pc == c)) for c in ids]
        return self._groups[key]

    def per_class(self, k: int, fn, union: bool = True) -> float:
        d = self.d[k]
        vals = [fn(d[np.ix_(r, c)], r, c) for r, c in self.class_groups(k, union)]
        return float(np.mean(vals)) if vals else 0.0


def _metric(fn):
    return lambda ctx, k, t: ctx.per_class(k, lambda d, r, c: fn(d))


def _ospa_c(ctx, k, t):
    cut = distance_threshold(ctx.base, t)
    return ctx.per_class(k, lambda d, r, c: ospa_from_distances(d, c=cut))


def _f1(ctx, k, t):
    dmax = distance_threshold(ctx.base, t)
    return ctx.per_class(k, lambda d, r, c: classic.f1_counts_from_distances(d, dmax).f1)


def _sweep(ctx, k, t, assign, d, r, c):
    scores = ctx.predictions[k].scores[c]
    d_aug = ctx.d_aug[k][np.ix_(r, c)] if assign == "optimal" else None
    flags = classic.match_predictions(d, scores, distance_threshold(ctx.base, t), assign, d_aug)
    return classic.Sweep.from_flags(scores, flags, len(r))


def _ap(assign):
    return lambda ctx, k, t: ctx.per_class(
        k, lambda d, r, c: classic.ap_from_sweep(_sweep(ctx, k, t, assign, d, r, c)), union=False)


def _amr(assign):
    return lambda ctx, k, t: ctx.per_class(
        k, lambda d, r, c: classic.log_amr_from_sweep(_sweep(ctx, k, t, assign, d, r, c)),
        union=False)


# ---------------------------------------------------------------------------
# tracking


class TrackingContext:
    """Per-instant distances between the reference tracks and each prediction."""

    def __init__(self, reference: TrackSet, predictions: list[TrackSet], base: str = "iou"):
        self.base = plain_base(base)
        self.pairs = []
        self.framewise = []
        for p in predictions:
            F, G = align(reference, p)
            self.pairs.append((F, G))
            self.framewise.append(framewise_distances(F, G, self.base))
        self._track_d: dict = {}

    def track_distances(self, k: int, c: float = 1.0) -> np.ndarray:
        key = (k, round(c, 12))
        if key not in self._track_d:
            F, G = self.pairs[k]
            self._track_d[key] = track_distances_from_framewise(
                self.framewise[k], F.present, G.present, c)
        return self._track_d[key]


def _track_metric(fn):
    return lambda ctx, k, t: fn(ctx.track_distances(k))


def _ospa2_c(ctx, k, t):
    cut = distance_threshold(ctx.base, t)
    return ospa_from_distances(ctx.track_distances(k, cut), c=cut)


def _mota(ctx, k, t):
    F, G = ctx.pairs[k]
    return classic.mota(F, G, t, ctx.base, ctx.framewise[k])[0]


def _idf1(ctx, k, t):
    F, G = ctx.pairs[k]
    return classic.idf1(F, G, t, ctx.base, ctx.framewise[k])


def _hota(ctx, k, t):
    F, G = ctx.pairs[k]
    return classic.hota(F, G, t, ctx.base, ctx.framewise[k])


DET = ("detect-single", "detect-multi")
MULTI = ("detect-multi",)
TRACK = ("track",)

CRITERIA: dict[str, Criterion] = {c.name: c for c in [
    Criterion("ospa", DET, False, False, _metric(ospa_from_distances)),
    Criterion("emd", DET, False, False, _metric(emd_from_distances)),
    Criterion("hausdorff", DET, False, False, _metric(hausdorff_from_distances)),
    Criterion("ospa_c", DET, False, True, _ospa_c),
    Criterion("f1", DET, True, True, _f1),
    Criterion("map", MULTI, True, True, _ap("greedy"), needs_scores=True),
    Criterion("map_optimal", MULTI, True, True, _ap("optimal"), needs_scores=True),
    Criterion("log_amr", MULTI, False, True, _amr("greedy"), needs_scores=True),
    Criterion("log_amr_optimal", MULTI, False, True, _amr("optimal"), needs_scores=True),
    Criterion("ospa2", TRACK, False, False, _track_metric(ospa_from_distances)),
    Criterion("emd_tracks", TRACK, False, False, _track_metric(emd_from_distances)),
    Criterion("hausdorff_tracks", TRACK, False, False, _track_metric(hausdorff_from_distances)),
    Criterion("ospa2_c", TRACK, False, True, _ospa2_c),
    Criterion("mota", TRACK, True, True, _mota),
    Criterion("idf1", TRACK, True, True, _idf1),
    Criterion("hota", TRACK, True, True, _hota),
]}


def default_criteria(task: str) -> list[str]:
    return [name for name, c in CRITERIA.items() if task in c.tasks]


def resolve(task: str, names=None) -> list[Criterion]:
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")
    names = default_criteria(task) if names is None else list(names)
    out = []
    for name in names:
        if name not in CRITERIA:
            raise ValueError(f"unknown criterion {name!r}")
        if task not in CRITERIA[name].tasks:
            raise ValueError(f"criterion {name!r} does not apply to task {task!r}")
        out.append(CRITERIA[name])
    return out


def make_context(task: str, reference, predictions, base: str, criteria: list[Criterion]):
    if task == "track":
        return TrackingContext(reference, predictions, base)
    augmented = any(c.name.endswith("_optimal") for c in criteria)
    return DetectionContext(reference, predictions, base, augmented)


def evaluate(ctx, criterion: Criterion, n_predictions: int, thresholds) -> np.ndarray:
    """``(n_predictions, n_columns)`` values; one column for threshold-free criteria."""
    ts = list(thresholds) if criterion.thresholded else [None]
    out = np.empty((n_predictions, len(ts)))
    for k in range(n_predictions):
        for j, t in enumerate(ts):
            out[k, j] = criterion.fn(ctx, k, t)
    return out
