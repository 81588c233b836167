"""Evaluation pipelines and their serialisable reports.

Reports carry only deterministic content (no timestamps or host names), so the
same configuration and seed always produce byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy

from . import classic
from .formats import Detections, fmt
from .geometry import pairwise_distance, plain_base
from .ranking import kendall_tau_normalized, ranks_from_scores, reliability
from .sanity import fig8_closed_form, fig8_scenario
from .sanity.criteria import DetectionContext, TrackingContext, evaluate, resolve
from .sanity.generators import fig8_shift
from .sanity.harness import COLUMNS, INDICATORS, ConsistencyResult, SanityResult
from .setmetrics import (
    emd_from_distances,
    hausdorff_from_distances,
    ospa_from_distances,
    ospa_unnormalized_from_distances,
)


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode()).hexdigest()


def versions() -> dict:
    from . import __version__

    return {"trusteval": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


@dataclass
class EvaluationReport:
    """Named tables (header row first) plus the configuration that made them."""

    command: str
    config: dict
    tables: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def body(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "config_hash": config_hash(self.config),
            "metadata": {**self.metadata, "versions": versions()},
            "tables": self.tables,
        }

    def to_json(self) -> str:
        return json.dumps(self.body(), indent=1, sort_keys=True, allow_nan=True) + "\n"

    @staticmethod
    def table_csv(rows: list[list]) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, float) else ("" if v is None else v) for v in row])
        return buf.getvalue()

    def write(self, directory) -> list[Path]:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        written = [out / "report.json"]
        written[0].write_text(self.to_json())
        for name, rows in sorted(self.tables.items()):
            p = out / f"{name}.csv"
            p.write_text(self.table_csv(rows))
            written.append(p)
        return written

    @classmethod
    def load(cls, path) -> "EvaluationReport":
        data = json.loads(Path(path).read_text())
        meta = dict(data.get("metadata", {}))
        meta.pop("versions", None)
        return cls(data["command"], data["config"], data["tables"], meta)


# ---------------------------------------------------------------------------
# evaluating ingested predictions


def _ranking_tables(scores: dict, ts: list[float], algorithms: list[str], criteria, base: str):
    """Rank, Kendall-tau and reliability tables from ``scores[name][alg] -> values``."""
    rank_rows = [["criterion", "threshold", "algorithm", "score", "rank"]]
    ref_t = classic.reference_threshold(base)
    ref_ranks = {}
    reliability_rows = [["criterion", *INDICATORS]]
    full = [t for t in classic.threshold_grid(base, "full") if any(np.isclose(ts, t))]
    for c in criteria:
        cols = ts if c.thresholded else [None]
        M = np.array([scores[c.name][a] for a in algorithms])  # algorithms x columns
        R = np.stack([ranks_from_scores(M[:, j], c.direction) for j in range(M.shape[1])], axis=1)
        for j, t in enumerate(cols):
            for i, a in enumerate(algorithms):
                rank_rows.append([c.name, t, a, float(M[i, j]), int(R[i, j])])
        j_ref = 0 if not c.thresholded else int(np.argmin(np.abs(np.asarray(ts) - ref_t)))
        ref_ranks[c.name] = R[:, j_ref]
        if c.thresholded and len(full) >= 2:
            idx = [int(np.argmin(np.abs(np.asarray(ts) - t))) for t in full]
            rel = reliability(R[:, idx], np.asarray(ts)[idx])
            reliability_rows.append([c.name] + [rel[k] for k in INDICATORS])
    names = [c.name for c in criteria]
    tau_rows = [["criterion", *names]]
    if len(algorithms) >= 2:
        for a in names:
            tau_rows.append([a] + [kendall_tau_normalized(ref_ranks[a], ref_ranks[b]) for b in names])
    return {"ranks": rank_rows, "kendall_tau": tau_rows, "reliability": reliability_rows}


def evaluate_detections(reference: Detections, predictions: dict[str, Detections],
                        criteria: Sequence[str] | None, thresholds: Sequence[float],
                        base: str = "iou", assign: str = "greedy",
                        interp: str = "all-point") -> dict:
    """Scores per criterion, algorithm and threshold, over all reference images.

    Set metrics and F1 are averaged over images (each image averaged over its
    classes); AP and log-AMR pool every image of a class before averaging
    over classes.
    """
    multi = any(len(S) and (S.classes >= 0).any() for S in reference.images.values())
    task = "detect-multi" if multi else "detect-single"
    has_scores = all(S.has_scores for d in predictions.values() for S in d.images.values())
    names = criteria or [c for c in ("ospa", "emd", "hausdorff", "ospa_c", "f1") +
                         (("map", "map_optimal", "log_amr", "log_amr_optimal") if has_scores else ())]
    # the multi-class registry is a superset of the single-class one
    crit = resolve("detect-multi", names)
    ts = [float(t) for t in thresholds]
    image_ids = reference.image_ids()
    algorithms = list(predictions)
    scores = {c.name: {} for c in crit}
    for a, det in predictions.items():
        unknown = set(det.images) - set(image_ids)
        if unknown:
            raise ValueError(f"{a}: predictions for images absent from the reference: "
                             f"{sorted(unknown)[:5]}")
        refs = [reference.get(i) for i in image_ids]
        preds = [det.get(i) for i in image_ids]
        ctxs = None
        for c in crit:
            if c.needs_scores:
                if not has_scores:
                    raise ValueError(f"criterion {c.name!r} needs scores on every prediction")
                assign_c = "optimal" if c.name.endswith("_optimal") else assign
                fn = classic.mean_ap if c.name.startswith("map") else classic.mean_log_amr
                kw = {"interp": interp} if c.name.startswith("map") else {}
                scores[c.name][a] = [fn(refs, preds, t, base, assign_c, **kw) for t in ts]
                continue
            if ctxs is None:
                ctxs = [DetectionContext(r, [p], base) for r, p in zip(refs, preds)]
            vals = np.mean([evaluate(ctx, c, 1, ts)[0] for ctx in ctxs], axis=0)
            scores[c.name][a] = vals.tolist()
    score_rows = [["criterion", "threshold", "algorithm", "score"]]
    for c in crit:
        cols = ts if c.thresholded else [None]
        for a in algorithms:
            for t, v in zip(cols, scores[c.name][a]):
                score_rows.append([c.name, t, a, float(v)])
    tables = {"scores": score_rows, **_ranking_tables(scores, ts, algorithms, crit, base)}
    return {"tables": tables, "task": task, "criteria": [c.name for c in crit]}


def evaluate_tracks(reference, predictions: dict, criteria: Sequence[str] | None,
                    thresholds: Sequence[float], base: str = "iou") -> dict:
    crit = resolve("track", criteria)
    ts = [float(t) for t in thresholds]
    algorithms = list(predictions)
    ctx = TrackingContext(reference, [predictions[a] for a in algorithms], plain_base(base))
    scores = {c.name: {} for c in crit}
    for c in crit:
        vals = evaluate(ctx, c, len(algorithms), ts)
        for i, a in enumerate(algorithms):
            scores[c.name][a] = vals[i].tolist()
    score_rows = [["criterion", "threshold", "algorithm", "score"]]
    for c in crit:
        cols = ts if c.thresholded else [None]
        for a in algorithms:
            for t, v in zip(cols, scores[c.name][a]):
                score_rows.append([c.name, t, a, float(v)])
    tables = {"scores": score_rows, **_ranking_tables(scores, ts, algorithms, crit, base)}
    return {"tables": tables, "task": "track", "criteria": [c.name for c in crit]}


# ---------------------------------------------------------------------------
# experiment tables


def sanity_tables(result: SanityResult) -> dict:
    summary = [["criterion", "column", "mean", "std", "threshold"]]
    per = [["criterion", "threshold", "mean", "std"]]
    rel = [["criterion", *INDICATORS]]
    for name, s in result.criteria.items():
        for col in COLUMNS:
            if col in s.columns:
                v = s.columns[col]
                summary.append([name, col, v["mean"], v["std"], v.get("threshold")])
        ts = s.thresholds or [None]
        for t, m, sd in zip(ts, s.per_threshold_mean, s.per_threshold_std):
            per.append([name, t, m, sd])
        if s.reliability:
            rel.append([name] + [s.reliability[k] for k in INDICATORS])
    return {"summary": summary, "per_threshold": per, "reliability": rel}


def consistency_tables(result: ConsistencyResult) -> dict:
    rows = [["criterion", "threshold", "ground_truth_mean", "approximate_truth_mean", "gap"]]
    summary = [["criterion", "column", "ground_truth_mean", "approximate_truth_mean"]]
    for name, g in result.ground_truth.items():
        a = result.approximate_truth[name]
        for t, gm, am in zip(g.thresholds or [None], g.per_threshold_mean, a.per_threshold_mean):
            rows.append([name, t, gm, am, am - gm])
        for col in COLUMNS:
            if col in g.columns and col in a.columns:
                summary.append([name, col, g.columns[col]["mean"], a.columns[col]["mean"]])
    return {"per_threshold": rows, "summary": summary}


def fig8_table(ks: Sequence[int] = range(1, 11)) -> list[list]:
    rows = [["k", "objects", "shift", "closed_form", "ospa", "emd", "hausdorff",
             "ospa_unnormalized", "unnormalized_closed_form", "f1_dissimilarity"]]
    for k in ks:
        X, Y = fig8_scenario(k)
        d = pairwise_distance(X, Y, "iou")
        cf = fig8_closed_form(k)
        f1 = classic.f1_counts_from_distances(d, 0.5).f1
        rows.append([k, len(X), fig8_shift(k), cf, ospa_from_distances(d), emd_from_distances(d),
                     hausdorff_from_distances(d), ospa_unnormalized_from_distances(d),
                     len(X) * cf, 1.0 - f1])
    return rows


def series_table(report: EvaluationReport) -> list[list]:
    """Tidy ``(criterion, threshold, series, value, rank)`` rows for plotting."""
    t = report.tables
    if "ranks" in t:
        return [["criterion", "threshold", "algorithm", "score", "rank"]] + t["ranks"][1:]
    if "per_threshold" in t:
        head = t["per_threshold"][0]
        out = [["criterion", "threshold", "series", "value", "rank"]]
        for row in t["per_threshold"][1:]:
            rec = dict(zip(head, row))
            for key in head[2:]:
                out.append([rec["criterion"], rec["threshold"], key, rec[key], None])
        return out
    raise ValueError(f"report of command {report.command!r} has no threshold series")
