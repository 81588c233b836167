"""Traditional detection and tracking criteria built on thresholded matching.

Thresholds follow one convention throughout: an IoU threshold ``t`` accepts a
pair when ``IoU >= t`` and a GIoU threshold ``t`` (on ``[-1, 1]``) accepts it
when ``GIoU >= t``; see :func:`trusteval.geometry.distance_threshold`.
Degenerate denominators yield a score of 0 rather than an error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .assignment import (
    greedy_match,
    max_cardinality_matching,
    solve_assignment,
    thresholded_matching,
)
from .geometry import (
    ATOL,
    ShapeError,
    ShapeSet,
    augmented_base,
    distance_threshold,
    pairwise_distance,
    plain_base,
)
from .setmetrics import TrackSet, align, framewise_distances

IOU_PARTIAL = tuple(np.round(np.arange(0.5, 0.951, 0.05), 2))
IOU_FULL = tuple(np.round(np.arange(0.05, 0.951, 0.05), 2))
GIOU_PARTIAL = IOU_PARTIAL
GIOU_FULL = tuple(np.round(np.arange(-0.9, 0.91, 0.1), 1))
HOTA_ALPHAS = IOU_FULL
FPPI_GRID = tuple(np.logspace(-2.0, 0.0, 9))
MISS_RATE_FLOOR = 1e-4


def threshold_grid(base: str, which: str = "full") -> tuple[float, ...]:
    """``"partial"`` (0.5 to 0.95) or ``"full"`` threshold grid for a base distance."""
    iou = plain_base(base) == "iou"
    if which == "partial":
        return IOU_PARTIAL if iou else GIOU_PARTIAL
    if which == "full":
        return IOU_FULL if iou else GIOU_FULL
    raise ValueError(f"grid must be 'partial' or 'full', got {which!r}")


def reference_threshold(base: str) -> float:
    """Conventional single threshold: IoU 0.5, GIoU 0."""
    return 0.5 if plain_base(base) == "iou" else 0.0


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0


# ---------------------------------------------------------------------------
# F1


def f1_counts_from_distances(d: np.ndarray, max_distance: float) -> ConfusionCounts:
    """Counts from a ``(refs, preds)`` distance matrix and an acceptance radius."""
    m, n = d.shape
    tp = len(thresholded_matching(d, max_distance))
    return ConfusionCounts(tp, n - tp, m - tp)


def f1_score(X_ref: ShapeSet, Y_pred: ShapeSet, threshold: float = 0.5,
             base: str = "iou") -> tuple[float, ConfusionCounts]:
    """F1 with true positives from the largest threshold-feasible optimal matching."""
    d = pairwise_distance(X_ref, Y_pred, plain_base(base))
    counts = f1_counts_from_distances(d, distance_threshold(base, threshold))
    return counts.f1, counts


# ---------------------------------------------------------------------------
# AP and log-AMR


def match_predictions(d: np.ndarray, scores: np.ndarray, max_distance: float,
                      assign: str = "greedy", d_assign: np.ndarray | None = None) -> np.ndarray:
    """Boolean true-positive flag per prediction (columns of ``d``).

    ``greedy`` visits predictions by descending score. ``optimal`` solves one
    assignment on ``d_assign`` (score-augmented distances) and keeps the pairs
    whose plain distance ``d`` is within ``max_distance``.
    """
    m, n = d.shape
    tp = np.zeros(n, dtype=bool)
    if m == 0 or n == 0:
        return tp
    if assign == "greedy":
        match = greedy_match(d.T, scores, max_distance)
        tp[match.rows] = True
    elif assign == "optimal":
        match, _ = solve_assignment(d if d_assign is None else d_assign)
        if len(match):
            ok = d[match.rows, match.cols] <= max_distance + ATOL
            tp[match.cols[ok]] = True
    else:
        raise ValueError(f"assign must be 'greedy' or 'optimal', got {assign!r}")
    return tp


@dataclass(frozen=True)
class Sweep:
    """Cumulative counts after each prediction, in descending score order."""

    tp: np.ndarray
    fp: np.ndarray
    n_ref: int
    n_images: int

    @classmethod
    def from_flags(cls, scores, flags, n_ref: int, n_images: int = 1) -> "Sweep":
        scores = np.asarray(scores, float)
        order = np.argsort(-scores, kind="stable")
        hit = np.asarray(flags, bool)[order]
        return cls(np.cumsum(hit), np.cumsum(~hit), int(n_ref), int(n_images))

    @property
    def recall(self) -> np.ndarray:
        return self.tp / self.n_ref if self.n_ref else np.zeros(len(self.tp))

    @property
    def precision(self) -> np.ndarray:
        return self.tp / np.maximum(self.tp + self.fp, 1)


def ap_from_sweep(sweep: Sweep, interp: str = "all-point") -> float:
    if sweep.n_ref == 0 or len(sweep.tp) == 0:
        return 0.0
    rec = sweep.recall
    prec = sweep.precision
    if interp == "all-point":
        r = np.concatenate([[0.0], rec])
        p = np.concatenate([[0.0], prec])
        env = np.maximum.accumulate(p[::-1])[::-1]
        return float(np.sum((r[1:] - r[:-1]) * env[1:]))
    if interp == "grid":
        env = np.maximum.accumulate(prec[::-1])[::-1]
        grid = np.linspace(0.0, 1.0, 101)
        idx = np.searchsorted(rec, grid - ATOL, side="left")
        vals = np.where(idx < len(rec), env[np.minimum(idx, len(rec) - 1)], 0.0)
        return float(vals.mean())
    raise ValueError(f"interp must be 'all-point' or 'grid', got {interp!r}")


def log_amr_from_sweep(sweep: Sweep, fppi_grid: Sequence[float] = FPPI_GRID,
                       floor: float = MISS_RATE_FLOOR) -> float:
    """Geometric mean of the miss rate sampled on an FPPI grid.

    At each sampled rate the miss rate is the lowest reached without exceeding
    that FPPI; the sweep starts from miss rate 1 at zero FPPI. When every
    sample is zero the result is exactly 0.
    """
    if sweep.n_ref == 0:
        return 1.0 if len(sweep.tp) else 0.0
    fppi = np.concatenate([[0.0], sweep.fp / max(sweep.n_images, 1)])
    miss = np.concatenate([[1.0], 1.0 - sweep.tp / sweep.n_ref])
    # miss rate never increases along the sweep, so the last reachable point wins
    idx = np.searchsorted(fppi, np.asarray(fppi_grid) + ATOL, side="right") - 1
    sampled = miss[idx]
    if not sampled.any():
        return 0.0
    return float(np.exp(np.mean(np.log(np.maximum(sampled, floor)))))


def _as_images(sets) -> list[ShapeSet]:
    return [sets] if isinstance(sets, ShapeSet) else list(sets)


def detection_sweep(X_ref, Y_pred, threshold: float = 0.5, base: str = "iou",
                    assign: str = "greedy") -> Sweep:
    """Pool score-ordered matches over one image or a sequence of images."""
    refs, preds = _as_images(X_ref), _as_images(Y_pred)
    if len(refs) != len(preds):
        raise ValueError("reference and prediction image lists differ in length")
    dmax = distance_threshold(base, threshold)
    scores, flags, n_ref = [], [], 0
    for X, Y in zip(refs, preds):
        if len(Y) and not Y.has_scores:
            raise ShapeError("average precision needs a score on every prediction")
        d = pairwise_distance(X, Y, plain_base(base))
        d_aug = pairwise_distance(X, Y, augmented_base(base)) if assign == "optimal" else None
        flags.append(match_predictions(d, Y.scores, dmax, assign, d_aug))
        scores.append(Y.scores)
        n_ref += len(X)
    return Sweep.from_flags(np.concatenate(scores) if scores else [],
                            np.concatenate(flags) if flags else [], n_ref, len(refs))


def average_precision(X_ref, Y_pred, threshold: float = 0.5, base: str = "iou",
                      assign: str = "greedy", interp: str = "all-point") -> float:
    return ap_from_sweep(detection_sweep(X_ref, Y_pred, threshold, base, assign), interp)


def log_amr(X_ref, Y_pred, threshold: float = 0.5, base: str = "iou", assign: str = "greedy",
            fppi_grid: Sequence[float] = FPPI_GRID) -> float:
    return log_amr_from_sweep(detection_sweep(X_ref, Y_pred, threshold, base, assign), fppi_grid)


def _classes_with_references(refs: list[ShapeSet]) -> list[int]:
    # unlabelled shapes (class -1) form a class of their own
    return sorted({c for X in refs for c in X.class_ids()})


def _per_class_mean(fn, X_ref, Y_pred, thresholds, classes) -> float:
    refs, preds = _as_images(X_ref), _as_images(Y_pred)
    classes = _classes_with_references(refs) if classes is None else list(classes)
    if not classes:
        raise ValueError("no classes to average over")
    ts = [thresholds] if np.isscalar(thresholds) else list(thresholds)
    vals = [fn([X.of_class(k) for X in refs], [Y.of_class(k) for Y in preds], t)
            for t in ts for k in classes]
    return float(np.mean(vals))


def mean_ap(X_ref, Y_pred, thresholds=0.5, base: str = "iou", assign: str = "greedy",
            interp: str = "all-point", classes: Sequence[int] | None = None) -> float:
    """AP averaged over classes present in the references and over ``thresholds``."""
    return _per_class_mean(lambda r, p, t: average_precision(r, p, t, base, assign, interp),
                           X_ref, Y_pred, thresholds, classes)


def mean_log_amr(X_ref, Y_pred, thresholds=0.5, base: str = "iou", assign: str = "greedy",
                 classes: Sequence[int] | None = None,
                 fppi_grid: Sequence[float] = FPPI_GRID) -> float:
    return _per_class_mean(lambda r, p, t: log_amr(r, p, t, base, assign, fppi_grid),
                           X_ref, Y_pred, thresholds, classes)


# ---------------------------------------------------------------------------
# tracking


@dataclass(frozen=True)
class FrameCounts:
    """Per-time-step CLEAR counts over the aligned window ``times``."""

    times: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    idsw: np.ndarray
    gt: np.ndarray
    tp: np.ndarray

    @property
    def mota(self) -> float:
        total = int(self.gt.sum())
        if total == 0:
            raise ValueError("MOTA is undefined without reference instances")
        return 1.0 - float(self.fp.sum() + self.fn.sum() + self.idsw.sum()) / total


def _prepare(F: TrackSet, G: TrackSet, base: str, framewise):
    F, G = align(F, G)
    if framewise is None:
        framewise = framewise_distances(F, G, plain_base(base))
    return F, G, framewise


def clear_counts(F_ref: TrackSet, G_pred: TrackSet, threshold: float = 0.5,
                 base: str = "iou", framewise: np.ndarray | None = None) -> FrameCounts:
    """Frame-by-frame CLEAR matching.

    A reference keeps the prediction it was last matched to while that pair
    stays within the threshold; the rest are matched by a largest, then
    cheapest, feasible assignment. A reference whose matched prediction differs
    from its previous one counts as an identity switch.
    """
    F, G, dist = _prepare(F_ref, G_pred, base, framewise)
    dmax = distance_threshold(base, threshold)
    pf, pg = F.present, G.present
    T = len(F.times)
    fp, fn, sw, gt, tps = (np.zeros(T, int) for _ in range(5))
    last = np.full(len(F), -1)
    for k in range(T):
        ri = np.flatnonzero(pf[:, k])
        ci = np.flatnonzero(pg[:, k])
        gt[k] = len(ri)
        if len(ri) == 0 or len(ci) == 0:
            fn[k], fp[k] = len(ri), len(ci)
            continue
        d = dist[np.ix_(ri, ci, [k])][..., 0]
        feas = d <= dmax + ATOL
        pairs = []
        free_r = np.ones(len(ri), bool)
        free_c = np.ones(len(ci), bool)
        col_of = {int(c): b for b, c in enumerate(ci)}
        for a, r in enumerate(ri):
            b = col_of.get(int(last[r]))
            if b is not None and free_c[b] and feas[a, b]:
                pairs.append((a, b))
                free_r[a] = free_c[b] = False
        rr, cc = np.flatnonzero(free_r), np.flatnonzero(free_c)
        if len(rr) and len(cc):
            sub = d[np.ix_(rr, cc)]
            for a, b in max_cardinality_matching(sub, feas[np.ix_(rr, cc)]).pairs:
                pairs.append((int(rr[a]), int(cc[b])))
        for a, b in pairs:
            r, c = ri[a], ci[b]
            if last[r] >= 0 and last[r] != c:
                sw[k] += 1
            last[r] = c
        tps[k] = len(pairs)
        fn[k] = len(ri) - len(pairs)
        fp[k] = len(ci) - len(pairs)
    return FrameCounts(F.times, fp, fn, sw, gt, tps)


def mota(F_ref: TrackSet, G_pred: TrackSet, threshold: float = 0.5, base: str = "iou",
         framewise: np.ndarray | None = None) -> tuple[float, FrameCounts]:
    counts = clear_counts(F_ref, G_pred, threshold, base, framewise)
    return counts.mota, counts


def idf1(F_ref: TrackSet, G_pred: TrackSet, threshold: float = 0.5, base: str = "iou",
         framewise: np.ndarray | None = None) -> float:
    """Identity F1 from the best one-to-one pairing of whole trajectories.

    Unpaired trajectories play against dummies, so maximising the summed
    per-frame overlap of paired trajectories minimises IDFP + IDFN.
    """
    F, G, dist = _prepare(F_ref, G_pred, base, framewise)
    n_gt = int(F.present.sum())
    n_pred = int(G.present.sum())
    if n_gt + n_pred == 0:
        return 0.0
    idtp = 0
    if len(F) and len(G):
        with np.errstate(invalid="ignore"):
            hit = dist <= distance_threshold(base, threshold) + ATOL
        overlap = hit.sum(axis=2).astype(float)
        match, _ = solve_assignment(-overlap)
        idtp = int(overlap[match.rows, match.cols].sum()) if len(match) else 0
    return 2.0 * idtp / (n_gt + n_pred)


def _global_alignment(F: TrackSet, G: TrackSet, sim: np.ndarray) -> np.ndarray:
    """Soft id-to-id alignment used to break ties in per-frame matching."""
    pf, pg = F.present, G.present
    potential = np.zeros((len(F), len(G)))
    for k in range(len(F.times)):
        ri = np.flatnonzero(pf[:, k])
        ci = np.flatnonzero(pg[:, k])
        if len(ri) == 0 or len(ci) == 0:
            continue
        s = sim[np.ix_(ri, ci, [k])][..., 0]
        denom = s.sum(axis=1, keepdims=True) + s.sum(axis=0, keepdims=True) - s
        potential[np.ix_(ri, ci)] += np.divide(s, denom, out=np.zeros_like(s), where=denom > 0)
    n_f = pf.sum(axis=1)[:, None]
    n_g = pg.sum(axis=1)[None, :]
    return potential / np.maximum(n_f + n_g - potential, 1e-12)


def hota_terms(F_ref: TrackSet, G_pred: TrackSet, alphas: Sequence[float],
               base: str = "iou", framewise: np.ndarray | None = None) -> list[tuple[float, int, int, int]]:
    """Per threshold: ``(sum of A(c) over TPs, TP, FN, FP)``."""
    F, G, dist = _prepare(F_ref, G_pred, base, framewise)
    pf, pg = F.present, G.present
    sim = 1.0 - np.nan_to_num(dist, nan=1.0)
    ga = _global_alignment(F, G, sim) if len(F) and len(G) else np.zeros((len(F), len(G)))
    n_f = pf.sum(axis=1)
    n_g = pg.sum(axis=1)
    total_f, total_g = int(n_f.sum()), int(n_g.sum())
    out = []
    for alpha in alphas:
        dmax = distance_threshold(base, alpha)
        pair_hits = np.zeros((len(F), len(G)))
        tp = 0
        for k in range(len(F.times)):
            ri = np.flatnonzero(pf[:, k])
            ci = np.flatnonzero(pg[:, k])
            if len(ri) == 0 or len(ci) == 0:
                continue
            d = dist[np.ix_(ri, ci, [k])][..., 0]
            score = ga[np.ix_(ri, ci)] * (1.0 - d)
            m = max_cardinality_matching(1.0 - score, d <= dmax + ATOL)
            if len(m):
                pair_hits[ri[m.rows], ci[m.cols]] += 1
                tp += len(m)
        denom = n_f[:, None] + n_g[None, :] - pair_hits
        assoc = np.divide(pair_hits, denom, out=np.zeros_like(pair_hits), where=pair_hits > 0)
        out.append((float((assoc * pair_hits).sum()), tp, total_f - tp, total_g - tp))
    return out


def _hota_value(a_sum: float, tp: int, fn: int, fp: int) -> float:
    denom = tp + fn + fp
    return float(np.sqrt(a_sum / denom)) if tp > 0 and denom > 0 else 0.0


def hota(F_ref: TrackSet, G_pred: TrackSet, alpha: float = 0.5, base: str = "iou",
         framewise: np.ndarray | None = None) -> float:
    """HOTA at one localisation threshold: ``sqrt(sum A(c) / (TP + FN + FP))``."""
    return _hota_value(*hota_terms(F_ref, G_pred, [alpha], base, framewise)[0])


def hota_marginal(F_ref: TrackSet, G_pred: TrackSet, base: str = "iou",
                  alpha_grid: Sequence[float] = HOTA_ALPHAS,
                  framewise: np.ndarray | None = None) -> float:
    terms = hota_terms(F_ref, G_pred, alpha_grid, base, framewise)
    return float(np.mean([_hota_value(*t) for t in terms]))
