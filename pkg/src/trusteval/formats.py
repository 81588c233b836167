"""Reading and writing COCO-style detections and MOT-style track files."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import Shape, ShapeError, ShapeSet
from .setmetrics import TrackSet


class DataError(ValueError):
    """Malformed input file."""


def fmt(x: float) -> str:
    """Shortest text that reads back to the same double."""
    return repr(float(x))


# ---------------------------------------------------------------------------
# COCO-style JSON


@dataclass
class Detections:
    """Shapes per image id, plus the record bookkeeping of the source file."""

    images: dict
    categories: dict = field(default_factory=dict)
    n_records: int = 0
    kind: str = "box"

    def image_ids(self) -> list:
        return sorted(self.images)

    def get(self, image_id) -> ShapeSet:
        return self.images.get(image_id, ShapeSet.from_boxes(np.zeros((0, 4)), frame_id=image_id))


def _decode_mask(seg, height: int | None, width: int | None, index: int) -> tuple[np.ndarray, tuple[int, int]]:
    from pycocotools import mask as mask_utils

    if isinstance(seg, dict):
        if "size" not in seg or "counts" not in seg:
            raise DataError(f"record {index}: RLE segmentation needs 'size' and 'counts'")
        h, w = (int(v) for v in seg["size"])
        rle = seg
        if isinstance(seg["counts"], list):
            rle = mask_utils.frPyObjects(seg, h, w)
        elif isinstance(seg["counts"], str):
            rle = {"size": [h, w], "counts": seg["counts"].encode("ascii")}
        full = mask_utils.decode(rle)
    elif isinstance(seg, list) and seg:
        polys = [list(map(float, p)) for p in seg]
        if any(len(p) < 6 or len(p) % 2 for p in polys):
            raise DataError(f"record {index}: polygon needs at least three (x, y) points")
        if height is None or width is None:
            height = int(math.ceil(max(max(p[1::2]) for p in polys))) + 1
            width = int(math.ceil(max(max(p[0::2]) for p in polys))) + 1
        rles = mask_utils.frPyObjects(polys, height, width)
        full = mask_utils.decode(mask_utils.merge(rles))
    else:
        raise DataError(f"record {index}: unsupported segmentation payload")
    full = np.asarray(full, bool)
    rows = np.flatnonzero(full.any(axis=1))
    cols = np.flatnonzero(full.any(axis=0))
    if len(rows) == 0:
        raise DataError(f"record {index}: segmentation covers no pixel")
    crop = full[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
    return crop, (int(cols[0]), int(rows[0]))


def _parse_annotation(ann: dict, index: int, kind: str, sizes: dict) -> Shape:
    if not isinstance(ann, dict):
        raise DataError(f"record {index}: expected an object, got {type(ann).__name__}")
    score = ann.get("score")
    if score is not None:
        try:
            score = float(score)
        except (TypeError, ValueError):
            raise DataError(f"record {index}: score is not a number") from None
        if not 0.0 < score <= 1.0:
            raise DataError(f"record {index}: score {score} outside (0, 1]")
    cat = ann.get("category_id")
    try:
        if kind == "mask":
            if "segmentation" not in ann:
                raise DataError(f"record {index}: no segmentation for a mask evaluation")
            h, w = sizes.get(ann.get("image_id"), (None, None))
            mask, origin = _decode_mask(ann["segmentation"], h, w, index)
            return Shape(mask=mask, origin=origin, score=score,
                         class_id=None if cat is None else int(cat))
        bbox = ann.get("bbox")
        if not isinstance(bbox, (list, tuple)) or len(bbox) != 4:
            raise DataError(f"record {index}: bbox must be [x, y, w, h]")
        x, y, w, h = (float(v) for v in bbox)
        if not (w > 0 and h > 0):
            raise DataError(f"record {index}: non-positive box size w={w}, h={h}")
        return Shape.from_xywh(x, y, w, h, score=score, class_id=None if cat is None else int(cat))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"record {index}: {exc}") from None


def load_detections(path, kind: str = "box") -> Detections:
    """Load a COCO ground-truth file (object with ``annotations``) or a
    results file (list of records) into one ShapeSet per image id."""
    if kind not in ("box", "mask"):
        raise ValueError(f"kind must be 'box' or 'mask', got {kind!r}")
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed JSON ({exc})") from None
    sizes, categories, image_ids = {}, {}, []
    if isinstance(data, dict):
        anns = data.get("annotations", [])
        for img in data.get("images", []):
            image_ids.append(img["id"])
            if "height" in img and "width" in img:
                sizes[img["id"]] = (int(img["height"]), int(img["width"]))
        categories = {c["id"]: c.get("name", str(c["id"])) for c in data.get("categories", [])}
    elif isinstance(data, list):
        anns = data
    else:
        raise DataError(f"{path}: expected a JSON object or list at top level")
    grouped: dict = {i: [] for i in image_ids}
    for index, ann in enumerate(anns):
        shape = _parse_annotation(ann, index, kind, sizes)
        if "image_id" not in ann:
            raise DataError(f"record {index}: missing image_id")
        grouped.setdefault(ann["image_id"], []).append(shape)
    images = {}
    for image_id, shapes in grouped.items():
        if kind == "box":
            boxes = np.array([s.box for s in shapes], float).reshape(-1, 4)
            scores = np.array([np.nan if s.score is None else s.score for s in shapes])
            classes = np.array([-1 if s.class_id is None else s.class_id for s in shapes], int)
            images[image_id] = ShapeSet.from_boxes(boxes, scores, classes, image_id, validate=False)
        else:
            images[image_id] = ShapeSet(shapes, image_id)
    loaded = sum(len(s) for s in images.values())
    if loaded != len(anns):
        raise DataError(f"{path}: {len(anns)} records read but {loaded} shapes kept")
    return Detections(images, categories, len(anns), kind)


def dump_detections(sets, path, categories: dict | None = None) -> None:
    """Write box ShapeSets as a COCO results list; references (no scores) are
    written in ground-truth layout with ``images`` and ``annotations``."""
    sets = [sets] if isinstance(sets, ShapeSet) else list(sets)
    records = []
    for i, S in enumerate(sets):
        image_id = i + 1 if S.frame_id is None else S.frame_id
        for j in range(len(S)):
            x0, y0, x1, y1 = (float(v) for v in S.boxes[j])
            rec = {"image_id": image_id, "bbox": [x0, y0, x1 - x0, y1 - y0]}
            if S.classes[j] >= 0:
                rec["category_id"] = int(S.classes[j])
            if not np.isnan(S.scores[j]):
                rec["score"] = float(S.scores[j])
            records.append(rec)
    scored = all("score" in r for r in records) and records
    if scored:
        payload = records
    else:
        ids = [i + 1 if S.frame_id is None else S.frame_id for i, S in enumerate(sets)]
        for n, r in enumerate(records):
            r["id"] = n + 1
        payload = {"images": [{"id": i} for i in ids], "annotations": records,
                   "categories": [{"id": k, "name": v} for k, v in (categories or {}).items()]}
    Path(path).write_text(json.dumps(payload, indent=1))


# ---------------------------------------------------------------------------
# MOT CSV


def load_tracks(path) -> TrackSet:
    """Rows ``frame,id,x,y,w,h,conf,...`` grouped by id; the window spans the
    observed frame range."""
    rows = []
    seen = set()
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 6:
                raise DataError(f"{path}:{lineno}: expected at least 6 fields, got {len(row)}")
            try:
                frame = int(float(row[0]))
                tid = int(float(row[1]))
                x, y, w, h = (float(v) for v in row[2:6])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric field") from None
            if not (w > 0 and h > 0):
                raise DataError(f"{path}:{lineno}: non-positive box size w={w}, h={h}")
            if (frame, tid) in seen:
                raise DataError(f"{path}:{lineno}: duplicate (frame, id) = ({frame}, {tid})")
            seen.add((frame, tid))
            rows.append((frame, tid, x, y, w, h))
    if not rows:
        return TrackSet.empty()
    frames = [r[0] for r in rows]
    times = np.arange(min(frames), max(frames) + 1)
    labels = sorted({r[1] for r in rows})
    li = {t: i for i, t in enumerate(labels)}
    boxes = np.full((len(labels), len(times), 4), np.nan)
    for frame, tid, x, y, w, h in rows:
        boxes[li[tid], frame - times[0]] = (x, y, x + w, y + h)
    return TrackSet(labels, boxes, times)


def dump_tracks(tracks: TrackSet, path) -> None:
    """MOT CSV rows ordered by frame then id; confidence and world fields are -1."""
    lines = []
    for k, t in enumerate(tracks.times):
        for i, label in enumerate(tracks.labels):
            b = tracks.boxes[i, k]
            if np.isnan(b[0]):
                continue
            lines.append(",".join([str(int(t)), str(label), fmt(b[0]), fmt(b[1]),
                                   fmt(b[2] - b[0]), fmt(b[3] - b[1]), "-1", "-1", "-1", "-1"]))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


# ---------------------------------------------------------------------------
# generated scenarios


def dump_scenario(scenario, directory, metadata: dict | None = None) -> list[Path]:
    """Write reference, predictions and a sidecar JSON describing the run."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    track = isinstance(scenario.reference, TrackSet)
    ext = "csv" if track else "json"
    dump = dump_tracks if track else dump_detections
    written = [out / f"reference.{ext}"]
    dump(scenario.reference, written[0])
    for k, pred in enumerate(scenario.predictions, start=1):
        p = out / f"prediction_{k:02d}.{ext}"
        dump(pred, p)
        written.append(p)
    side = {"ranks": [int(r) for r in scenario.ranks], "params": scenario.params,
            "files": [p.name for p in written], **(metadata or {})}
    (out / "scenario.json").write_text(json.dumps(side, indent=1, sort_keys=True))
    return written


def load_scenario(directory):
    from .sanity.generators import SanityScenario

    d = Path(directory)
    side = json.loads((d / "scenario.json").read_text())
    files = side["files"]
    if files[0].endswith(".csv"):
        ref = load_tracks(d / files[0])
        preds = [load_tracks(d / f) for f in files[1:]]
    else:
        def one(p):
            dets = load_detections(p)
            ids = dets.image_ids()
            return dets.get(ids[0]) if ids else ShapeSet.from_boxes(np.zeros((0, 4)))
        ref = one(d / files[0])
        preds = [one(d / f) for f in files[1:]]
    return SanityScenario(ref, preds, np.asarray(side["ranks"]), side["params"])
