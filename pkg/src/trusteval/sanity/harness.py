"""Monte Carlo ranking-error experiments over generated scenarios.

Every trial draws its own seed from ``SeedSequence(seed).spawn``, so results
depend only on ``(seed, trials)`` and trials could run in any order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..classic import reference_threshold, threshold_grid
from ..ranking import (
    avg_rank_distortion,
    avg_rank_sensitivity,
    avg_rank_switches,
    kendall_tau_normalized,
    ranks_from_scores,
)
from .criteria import Criterion, evaluate, make_context, resolve
from .generators import (
    DetectionSanityConfig,
    TrackingSanityConfig,
    gen_detection_scenario,
    gen_tracking_scenario,
    perturb_to_approximate_truth,
)

COLUMNS = ("reference", "optimal", "partial", "full")
INDICATORS = ("switches", "distortion", "sensitivity")


def default_thresholds(base: str) -> list[float]:
    ts = set(threshold_grid(base, "full")) | set(threshold_grid(base, "partial"))
    ts.add(reference_threshold(base))
    return sorted(float(t) for t in ts)


def _index_of(ts: np.ndarray, values) -> np.ndarray | None:
    """Positions of ``values`` within ``ts``, or None if any is missing."""
    out = []
    for v in values:
        hit = np.flatnonzero(np.isclose(ts, v, atol=1e-9))
        if len(hit) == 0:
            return None
        out.append(int(hit[0]))
    return np.asarray(out)


def ranks_in_order(values: np.ndarray, direction: str, order: np.ndarray) -> np.ndarray:
    """Ranks with ties broken by position in the presentation ``order``."""
    r = ranks_from_scores(values[order], direction)
    out = np.empty_like(r)
    out[order] = r
    return out


@dataclass
class TrialErrors:
    per_threshold: np.ndarray
    partial: float | None
    full: float | None
    reliability: dict | None


def trial_errors(values: np.ndarray, criterion: Criterion, ts: np.ndarray, base: str,
                 truth: np.ndarray, order: np.ndarray) -> TrialErrors:
    """Kendall-tau errors of one trial's ``(K, columns)`` criterion values."""
    d = criterion.direction
    per = np.array([kendall_tau_normalized(ranks_in_order(values[:, j], d, order), truth)
                    for j in range(values.shape[1])])
    if not criterion.thresholded:
        return TrialErrors(per, per[0], per[0], None)
    grid_err = {}
    reliability = None
    for which in ("partial", "full"):
        idx = _index_of(ts, threshold_grid(base, which))
        if idx is None:
            grid_err[which] = None
            continue
        averaged = values[:, idx].mean(axis=1)
        grid_err[which] = kendall_tau_normalized(ranks_in_order(averaged, d, order), truth)
        if which == "full":
            R = np.stack([ranks_in_order(values[:, j], d, order) for j in idx], axis=1)
            reliability = {
                "switches": avg_rank_switches(R),
                "distortion": avg_rank_distortion(R),
                "sensitivity": avg_rank_sensitivity(R, ts[idx]),
            }
    return TrialErrors(per, grid_err["partial"], grid_err["full"], reliability)


@dataclass
class CriterionSummary:
    name: str
    direction: str
    thresholds: list[float] | None
    per_threshold_mean: list[float]
    per_threshold_std: list[float]
    columns: dict = field(default_factory=dict)
    reliability: dict | None = None


def _mean_std(xs) -> dict:
    xs = np.asarray(xs, float)
    return {"mean": float(xs.mean()), "std": float(xs.std())}


def summarize(criterion: Criterion, ts: np.ndarray, base: str,
              errors: list[TrialErrors]) -> CriterionSummary:
    per = np.stack([e.per_threshold for e in errors])
    mean, std = per.mean(axis=0), per.std(axis=0)
    summary = CriterionSummary(criterion.name, criterion.direction,
                               [float(t) for t in ts] if criterion.thresholded else None,
                               mean.tolist(), std.tolist())
    if not criterion.thresholded:
        col = _mean_std(per[:, 0])
        summary.columns = {c: dict(col) for c in COLUMNS}
        return summary
    ref = _index_of(ts, [reference_threshold(base)])
    if ref is not None:
        summary.columns["reference"] = {**_mean_std(per[:, ref[0]]),
                                        "threshold": float(ts[ref[0]])}
    best = int(np.argmin(mean))
    summary.columns["optimal"] = {**_mean_std(per[:, best]), "threshold": float(ts[best])}
    for which in ("partial", "full"):
        vals = [getattr(e, which) for e in errors]
        if all(v is not None for v in vals):
            summary.columns[which] = _mean_std(vals)
    rel = [e.reliability for e in errors if e.reliability is not None]
    if rel:
        summary.reliability = {k: float(np.mean([r[k] for r in rel])) for k in INDICATORS}
    return summary


@dataclass
class SanityResult:
    task: str
    base: str
    trials: int
    seed: int
    criteria: dict
    metadata: dict = field(default_factory=dict)


def generate(task: str, rng, det_config=None, track_config=None):
    if task == "track":
        return gen_tracking_scenario(track_config or TrackingSanityConfig(), rng)
    mode = "multi" if task == "detect-multi" else "single"
    return gen_detection_scenario(det_config or DetectionSanityConfig(), mode, rng)


def trial_values(task: str, reference, predictions, criteria: list[Criterion],
                 ts: Sequence[float], base: str) -> dict[str, np.ndarray]:
    ctx = make_context(task, reference, predictions, base, criteria)
    return {c.name: evaluate(ctx, c, len(predictions), ts) for c in criteria}


def _setup(task, criteria, thresholds, base):
    crit = resolve(task, criteria)
    ts = np.asarray(sorted(default_thresholds(base) if thresholds is None else thresholds), float)
    if len(ts) == 0:
        raise ValueError("threshold grid is empty")
    if len(ts) > 1 and not (np.diff(ts) > 0).all():
        raise ValueError("thresholds must be distinct")
    return crit, ts


def run_sanity_experiment(task: str, criteria: Sequence[str] | None = None,
                          thresholds: Sequence[float] | None = None, trials: int = 100,
                          seed: int = 0, base: str = "iou",
                          det_config: DetectionSanityConfig | None = None,
                          track_config: TrackingSanityConfig | None = None,
                          progress: Callable[[int], None] | None = None) -> SanityResult:
    """Rank the generated predictions with each criterion and score the ranking
    against the constructed order, over ``trials`` independent scenarios."""
    if trials < 1:
        raise ValueError("need at least one trial")
    crit, ts = _setup(task, criteria, thresholds, base)
    errors = {c.name: [] for c in crit}
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(trials)):
        gen_ss, order_ss = child.spawn(2)
        scenario = generate(task, np.random.default_rng(gen_ss), det_config, track_config)
        K = len(scenario.predictions)
        order = np.random.default_rng(order_ss).permutation(K)
        values = trial_values(task, scenario.reference, scenario.predictions, crit, ts, base)
        for c in crit:
            errors[c.name].append(trial_errors(values[c.name], c, ts, base, scenario.ranks, order))
        if progress:
            progress(i)
    summaries = {c.name: summarize(c, ts, base, errors[c.name]) for c in crit}
    return SanityResult(task, base, trials, seed, summaries,
                        {"thresholds": ts.tolist(), "tie_break": "random presentation order"})


@dataclass
class ConsistencyResult:
    task: str
    base: str
    trials: int
    seed: int
    min_iou: float
    ground_truth: dict
    approximate_truth: dict
    metadata: dict = field(default_factory=dict)

    def gap(self, name: str) -> np.ndarray:
        """Approximate-truth minus ground-truth mean error, per threshold."""
        return (np.asarray(self.approximate_truth[name].per_threshold_mean)
                - np.asarray(self.ground_truth[name].per_threshold_mean))


def run_consistency_experiment(task: str, criteria: Sequence[str] | None = None,
                               thresholds: Sequence[float] | None = None, trials: int = 100,
                               seed: int = 0, base: str = "iou", min_iou: float = 0.9,
                               det_config: DetectionSanityConfig | None = None,
                               track_config: TrackingSanityConfig | None = None,
                               progress: Callable[[int], None] | None = None) -> ConsistencyResult:
    """Ranking errors measured against the ground truth and against an
    annotation-like approximate truth of the same scenario."""
    if trials < 1:
        raise ValueError("need at least one trial")
    crit, ts = _setup(task, criteria, thresholds, base)
    gt = {c.name: [] for c in crit}
    at = {c.name: [] for c in crit}
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(trials)):
        gen_ss, order_ss, approx_ss = child.spawn(3)
        scenario = generate(task, np.random.default_rng(gen_ss), det_config, track_config)
        K = len(scenario.predictions)
        order = np.random.default_rng(order_ss).permutation(K)
        approx = perturb_to_approximate_truth(scenario.reference, min_iou,
                                              np.random.default_rng(approx_ss))
        v_gt = trial_values(task, scenario.reference, scenario.predictions, crit, ts, base)
        v_at = trial_values(task, approx, scenario.predictions, crit, ts, base)
        for c in crit:
            gt[c.name].append(trial_errors(v_gt[c.name], c, ts, base, scenario.ranks, order))
            at[c.name].append(trial_errors(v_at[c.name], c, ts, base, scenario.ranks, order))
        if progress:
            progress(i)
    return ConsistencyResult(
        task, base, trials, seed, min_iou,
        {c.name: summarize(c, ts, base, gt[c.name]) for c in crit},
        {c.name: summarize(c, ts, base, at[c.name]) for c in crit},
        {"thresholds": ts.tolist()})
