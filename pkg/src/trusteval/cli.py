"""Command-line entry point: ``trusteval <command> [options]``.

Options may also come from a flat ``key = value`` file given with
``--config``; flags on the command line win. ``TRUSTEVAL_SEED`` sets the
default seed. Exit status is 0 on success, 1 for bad input or usage and 2
for internal errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import classic
from .formats import DataError, load_detections, load_tracks
from .report import (
    EvaluationReport,
    consistency_tables,
    evaluate_detections,
    evaluate_tracks,
    fig8_table,
    sanity_tables,
    series_table,
)
from .sanity import run_consistency_experiment, run_sanity_experiment
from .sanity.criteria import TASKS
from .sanity.harness import default_thresholds


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(",", " ").split()]


def _names(text) -> list[str] | None:
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return list(text)
    return [v for v in str(text).replace(",", " ").split() if v]


def _seed_default() -> int:
    env = os.environ.get("TRUSTEVAL_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"TRUSTEVAL_SEED must be an integer, got {env!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="trusteval", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seeded=False):
        sp.add_argument("--config", help="flat key = value file with option defaults")
        sp.add_argument("--out", help="output directory for report.json and CSV tables")
        sp.add_argument("--base", choices=["iou", "giou"])
        sp.add_argument("--thresholds", help="threshold grid, comma or space separated")
        sp.add_argument("--criteria", help="criteria to compute, comma separated")
        if seeded:
            sp.add_argument("--seed", type=int)
            sp.add_argument("--trials", type=int)

    sp = sub.add_parser("eval-detect", help="evaluate COCO-style detection files")
    common(sp)
    sp.add_argument("--reference")
    sp.add_argument("--predictions", nargs="+")
    sp.add_argument("--kind", choices=["box", "mask"])
    sp.add_argument("--assign", choices=["greedy", "optimal"])
    sp.add_argument("--interp", choices=["all-point", "grid"])

    sp = sub.add_parser("eval-track", help="evaluate MOT-style track files")
    common(sp)
    sp.add_argument("--reference")
    sp.add_argument("--predictions", nargs="+")

    for name, helptext in (("sanity", "ranking error on generated scenarios"),
                           ("consistency", "ground-truth versus approximate-truth ranking error")):
        sp = sub.add_parser(name, help=helptext)
        common(sp, seeded=True)
        sp.add_argument("--task", choices=list(TASKS))
        if name == "consistency":
            sp.add_argument("--min-iou", type=float, dest="min_iou")

    sp = sub.add_parser("fig8", help="shrinking-shift scenario with closed-form distances")
    sp.add_argument("--config")
    sp.add_argument("--out")

    sp = sub.add_parser("report", help="tidy threshold series from a saved report")
    sp.add_argument("--config")
    sp.add_argument("--input")
    sp.add_argument("--out")
    return p


DEFAULTS = {
    "base": "iou", "kind": "box", "assign": "greedy", "interp": "all-point",
    "trials": 100, "task": "detect-single", "min_iou": 0.9,
}


def resolve_options(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS)
    opts["seed"] = _seed_default()
    if getattr(args, "config", None):
        opts.update(read_config_file(args.config))
    opts.update({k: v for k, v in vars(args).items() if v is not None and k != "config"})
    for key in ("trials", "seed"):
        if key in opts:
            try:
                opts[key] = int(opts[key])
            except (TypeError, ValueError):
                raise UsageError(f"{key} must be an integer, got {opts[key]!r}") from None
    if "min_iou" in opts:
        opts["min_iou"] = float(opts["min_iou"])
    if opts.get("predictions") and isinstance(opts["predictions"], str):
        opts["predictions"] = opts["predictions"].split()
    if "thresholds" in opts:
        ts = _floats(opts["thresholds"])
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise UsageError("threshold grid must be strictly increasing")
        opts["thresholds"] = ts
    else:
        opts["thresholds"] = default_thresholds(opts["base"])
    opts["criteria"] = _names(opts.get("criteria"))
    return opts


def _require(opts, *keys):
    for k in keys:
        if not opts.get(k):
            raise UsageError(f"--{k.replace('_', '-')} is required")


def _algorithm_names(paths) -> list[str]:
    names = [Path(p).stem for p in paths]
    if len(set(names)) != len(names):
        names = [str(p) for p in paths]
    return names


def _config_for_report(opts: dict, keys) -> dict:
    return {k: opts.get(k) for k in keys}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    opts = resolve_options(args)
    cmd = opts["command"]
    if cmd == "eval-detect":
        _require(opts, "reference", "predictions")
        ref = load_detections(opts["reference"], opts["kind"])
        preds = {n: load_detections(p, opts["kind"])
                 for n, p in zip(_algorithm_names(opts["predictions"]), opts["predictions"])}
        res = evaluate_detections(ref, preds, opts["criteria"], opts["thresholds"],
                                  opts["base"], opts["assign"], opts["interp"])
        config = _config_for_report(opts, ("base", "kind", "assign", "interp", "thresholds"))
        config.update(criteria=res["criteria"], algorithms=list(preds))
        meta = {"records": {"reference": ref.n_records,
                            **{n: d.n_records for n, d in preds.items()}},
                "task": res["task"], "rank_ties": "broken by input order"}
        report = EvaluationReport(cmd, config, res["tables"], meta)
    elif cmd == "eval-track":
        _require(opts, "reference", "predictions")
        ref = load_tracks(opts["reference"])
        preds = {n: load_tracks(p)
                 for n, p in zip(_algorithm_names(opts["predictions"]), opts["predictions"])}
        res = evaluate_tracks(ref, preds, opts["criteria"], opts["thresholds"], opts["base"])
        config = _config_for_report(opts, ("base", "thresholds"))
        config.update(criteria=res["criteria"], algorithms=list(preds))
        meta = {"tracks": {"reference": len(ref), **{n: len(t) for n, t in preds.items()}},
                "rank_ties": "broken by input order"}
        report = EvaluationReport(cmd, config, res["tables"], meta)
    elif cmd in ("sanity", "consistency"):
        if opts["trials"] < 1:
            raise UsageError("--trials must be at least 1")
        kw = dict(task=opts["task"], criteria=opts["criteria"], thresholds=opts["thresholds"],
                  trials=opts["trials"], seed=opts["seed"], base=opts["base"])
        if cmd == "sanity":
            result = run_sanity_experiment(**kw)
            tables = sanity_tables(result)
            crit = list(result.criteria)
        else:
            result = run_consistency_experiment(min_iou=opts["min_iou"], **kw)
            tables = consistency_tables(result)
            crit = list(result.ground_truth)
        config = _config_for_report(opts, ("task", "base", "thresholds", "trials", "seed"))
        if cmd == "consistency":
            config["min_iou"] = opts["min_iou"]
        config["criteria"] = crit
        meta = {"ospa_c_cutoff": "distance accepted at the threshold: 1 - t (IoU), (1 - t)/2 (GIoU)",
                "size_noise": [0.95, 1.05], "rank_ties": "random presentation order per trial",
                "partial_grid": list(classic.threshold_grid(opts["base"], "partial")),
                "full_grid": list(classic.threshold_grid(opts["base"], "full"))}
        report = EvaluationReport(cmd, config, tables, meta)
    elif cmd == "fig8":
        report = EvaluationReport(cmd, {"k": list(range(1, 11))}, {"fig8": fig8_table()})
    elif cmd == "report":
        _require(opts, "input")
        src = EvaluationReport.load(opts["input"])
        report = EvaluationReport(cmd, {"source_command": src.command,
                                        "source_config_hash": src.body()["config_hash"]},
                                  {"series": series_table(src)})
    else:  # pragma: no cover - argparse restricts the choices
        raise UsageError(f"unknown command {cmd!r}")

    if opts.get("out"):
        report.write(opts["out"])
    else:
        sys.stdout.write(report.to_json())
    return 0


def main(argv=None) -> int:
    try:
        code = run(argv)
    except (UsageError, DataError, FileNotFoundError, ValueError) as exc:
        print(f"trusteval: error: {exc}", file=sys.stderr)
        code = 1
    except Exception as exc:  # noqa: BLE001 - report, then signal an internal failure
        print(f"trusteval: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = 2
    return code


if __name__ == "__main__":
    sys.exit(main())
