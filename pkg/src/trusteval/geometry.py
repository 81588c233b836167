"""Shapes and shape distances.

Boxes are axis-aligned ``(x_min, y_min, x_max, y_max)`` in pixels. Masks are
binary occupancy grids anchored at an integer ``origin = (x, y)`` giving the
pixel coordinate of cell ``[0, 0]``; cell ``[r, c]`` covers the unit square
``[x + c, x + c + 1] x [y + r, y + r + 1]``.

Every distance lives in ``[0, 1]``:

* ``iou``: ``1 - IoU``
* ``giou``: ``(1 - GIoU) / 2``
* ``augmented-iou`` / ``augmented-giou``: the same formulas applied to boxes
  extruded along a score axis over ``(0, s]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Literal, Sequence

import numpy as np
from scipy.spatial import ConvexHull

Base = Literal["iou", "giou", "augmented-iou", "augmented-giou"]
BASES: tuple[str, ...] = ("iou", "giou", "augmented-iou", "augmented-giou")

ATOL = 1e-9


def check_base(base: str) -> str:
    if base not in BASES:
        raise ValueError(f"unknown base distance {base!r}; expected one of {BASES}")
    return base


def plain_base(base: str) -> str:
    """Strip the score augmentation: ``augmented-giou`` -> ``giou``."""
    return check_base(base).replace("augmented-", "")


def augmented_base(base: str) -> str:
    return "augmented-" + plain_base(base)


def distance_threshold(base: str, threshold: float) -> float:
    """Largest base distance accepted as a match at an overlap ``threshold``.

    IoU thresholds live on ``[0, 1]`` and GIoU thresholds on ``[-1, 1]``, so a
    pair matches when ``IoU >= t`` (``d <= 1 - t``) or ``GIoU >= t``
    (``d <= (1 - t) / 2``).
    """
    if plain_base(base) == "iou":
        return 1.0 - threshold
    return (1.0 - threshold) / 2.0


class ShapeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Shape:
    """A single box or mask with an optional confidence score and class."""

    box: tuple[float, float, float, float] | None = None
    mask: np.ndarray | None = None
    origin: tuple[int, int] = (0, 0)
    score: float | None = None
    class_id: int | None = None

    def __post_init__(self) -> None:
        if (self.box is None) == (self.mask is None):
            raise ShapeError("a Shape is either a box or a mask")
        if self.box is not None:
            box = tuple(float(v) for v in self.box)
            if len(box) != 4 or not all(np.isfinite(box)):
                raise ShapeError(f"box must be 4 finite numbers, got {self.box!r}")
            if not (box[0] < box[2] and box[1] < box[3]):
                raise ShapeError(f"zero-area or inverted box {box!r}")
            object.__setattr__(self, "box", box)
        else:
            mask = np.asarray(self.mask, dtype=bool)
            if mask.ndim != 2 or not mask.any():
                raise ShapeError("mask must be a 2-D grid with at least one occupied cell")
            object.__setattr__(self, "mask", mask)
            object.__setattr__(self, "origin", (int(self.origin[0]), int(self.origin[1])))
        if self.score is not None:
            score = float(self.score)
            if not 0.0 < score <= 1.0:
                raise ShapeError(f"score must lie in (0, 1], got {score}")
            object.__setattr__(self, "score", score)
        if self.class_id is not None:
            if int(self.class_id) < 0:
                raise ShapeError(f"class_id must be non-negative, got {self.class_id}")
            object.__setattr__(self, "class_id", int(self.class_id))

    @property
    def kind(self) -> str:
        return "box" if self.box is not None else "mask"

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float, **kwargs) -> "Shape":
        return cls(box=(x, y, x + w, y + h), **kwargs)

    def with_score(self, score: float | None) -> "Shape":
        return Shape(box=self.box, mask=self.mask, origin=self.origin, score=score,
                     class_id=self.class_id)


def volume(s: Shape) -> float:
    """Area of a box, or occupied-cell count of a mask."""
    if s.kind == "box":
        x0, y0, x1, y1 = s.box
        return (x1 - x0) * (y1 - y0)
    return float(np.count_nonzero(s.mask))


# ---------------------------------------------------------------------------
# box arithmetic (vectorised)


def _box_terms(a: np.ndarray, b: np.ndarray):
    """Broadcast intersection, union and enclosing-box areas of box arrays."""
    area_a = (a[..., 2] - a[..., 0]) * (a[..., 3] - a[..., 1])
    area_b = (b[..., 2] - b[..., 0]) * (b[..., 3] - b[..., 1])
    iw = np.minimum(a[..., 2], b[..., 2]) - np.maximum(a[..., 0], b[..., 0])
    ih = np.minimum(a[..., 3], b[..., 3]) - np.maximum(a[..., 1], b[..., 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    hull = ((np.maximum(a[..., 2], b[..., 2]) - np.minimum(a[..., 0], b[..., 0]))
            * (np.maximum(a[..., 3], b[..., 3]) - np.minimum(a[..., 1], b[..., 1])))
    return area_a, area_b, inter, hull


def _distance_from_terms(area_a, area_b, inter, hull, kind: str):
    union = area_a + area_b - inter
    iou = inter / union
    if kind == "iou":
        d = 1.0 - iou
    else:
        giou = iou - (hull - union) / hull
        d = (1.0 - giou) / 2.0
    return np.clip(d, 0.0, 1.0)


def box_distance(a: np.ndarray, b: np.ndarray, base: str = "iou",
                 score_a: np.ndarray | None = None,
                 score_b: np.ndarray | None = None) -> np.ndarray:
    """Element-wise (broadcasting) distance between box arrays ``(..., 4)``."""
    kind = plain_base(base)
    area_a, area_b, inter, hull = _box_terms(np.asarray(a, float), np.asarray(b, float))
    if base.startswith("augmented-"):
        if score_a is None or score_b is None:
            raise ShapeError("augmented distances need scores on both sides")
        sa = np.asarray(score_a, float)
        sb = np.asarray(score_b, float)
        # extrusion over (0, s]: depths multiply areas, overlap depth is min(s_a, s_b)
        inter = inter * np.minimum(sa, sb)
        hull = hull * np.maximum(sa, sb)
        area_a = area_a * sa
        area_b = area_b * sb
    return _distance_from_terms(area_a, area_b, inter, hull, kind)


def pairwise_box_distance(a: np.ndarray, b: np.ndarray, base: str = "iou",
                          score_a=None, score_b=None) -> np.ndarray:
    a = np.asarray(a, float).reshape(-1, 4)
    b = np.asarray(b, float).reshape(-1, 4)
    if score_a is not None:
        score_a = np.asarray(score_a, float)[:, None]
    if score_b is not None:
        score_b = np.asarray(score_b, float)[None, :]
    return box_distance(a[:, None, :], b[None, :, :], base, score_a, score_b)


# ---------------------------------------------------------------------------
# masks


def _mask_overlap(a: Shape, b: Shape) -> int:
    ax, ay = a.origin
    bx, by = b.origin
    ah, aw = a.mask.shape
    bh, bw = b.mask.shape
    x0, x1 = max(ax, bx), min(ax + aw, bx + bw)
    y0, y1 = max(ay, by), min(ay + ah, by + bh)
    if x0 >= x1 or y0 >= y1:
        return 0
    sa = a.mask[y0 - ay:y1 - ay, x0 - ax:x1 - ax]
    sb = b.mask[y0 - by:y1 - by, x0 - bx:x1 - bx]
    return int(np.count_nonzero(sa & sb))


def _extreme_corners(s: Shape) -> np.ndarray:
    # leftmost/rightmost occupied cell of every row carry all hull vertices
    rows = np.flatnonzero(s.mask.any(axis=1))
    sub = s.mask[rows]
    left = sub.argmax(axis=1)
    right = sub.shape[1] - 1 - sub[:, ::-1].argmax(axis=1)
    ox, oy = s.origin
    pts = []
    for r, lo, hi in zip(rows, left, right):
        y = oy + r
        pts.extend([(ox + lo, y), (ox + lo, y + 1), (ox + hi + 1, y), (ox + hi + 1, y + 1)])
    return np.asarray(pts, dtype=float)


def _hull_area(points: np.ndarray) -> float:
    pts = np.unique(points, axis=0)
    return float(ConvexHull(pts).volume)


def mask_distance(a: Shape, b: Shape, kind: str = "iou") -> float:
    inter = _mask_overlap(a, b)
    va, vb = volume(a), volume(b)
    union = va + vb - inter
    iou = inter / union
    if kind == "iou":
        return float(min(max(1.0 - iou, 0.0), 1.0))
    hull = _hull_area(np.vstack([_extreme_corners(a), _extreme_corners(b)]))
    giou = iou - (hull - union) / hull
    return float(min(max((1.0 - giou) / 2.0, 0.0), 1.0))


# ---------------------------------------------------------------------------
# single-pair API


def _require_same_kind(a: Shape, b: Shape) -> None:
    if a.kind != b.kind:
        raise ShapeError(f"cannot compare a {a.kind} with a {b.kind}")


def iou_distance(a: Shape, b: Shape) -> float:
    _require_same_kind(a, b)
    if a.kind == "mask":
        return mask_distance(a, b, "iou")
    return float(box_distance(np.array(a.box), np.array(b.box), "iou"))


def giou_distance(a: Shape, b: Shape) -> float:
    _require_same_kind(a, b)
    if a.kind == "mask":
        return mask_distance(a, b, "giou")
    return float(box_distance(np.array(a.box), np.array(b.box), "giou"))


def augmented_distance(a: Shape, b: Shape, kind: str = "iou") -> float:
    """IoU/GIoU distance between score-extruded boxes.

    Masks are compared with the plain distance of the same kind; their scores
    are ignored.
    """
    if kind not in ("iou", "giou"):
        raise ValueError(f"kind must be 'iou' or 'giou', got {kind!r}")
    _require_same_kind(a, b)
    if a.score is None or b.score is None:
        raise ShapeError("augmented distance needs a score on both shapes")
    if a.kind == "mask":
        return mask_distance(a, b, kind)
    return float(box_distance(np.array(a.box), np.array(b.box), "augmented-" + kind,
                              a.score, b.score))


def distance(a: Shape, b: Shape, base: str = "iou") -> float:
    base = check_base(base)
    if base == "iou":
        return iou_distance(a, b)
    if base == "giou":
        return giou_distance(a, b)
    return augmented_distance(a, b, plain_base(base))


# ---------------------------------------------------------------------------
# sets of shapes


class ShapeSet:
    """A finite (possibly empty) set of shapes observed in one frame or image.

    Box sets are held as an ``(n, 4)`` array so that pairwise distances can be
    computed without materialising :class:`Shape` objects.
    """

    def __init__(self, shapes: Sequence[Shape] = (), frame_id=None):
        shapes = list(shapes)
        kinds = {s.kind for s in shapes}
        if len(kinds) > 1:
            raise ShapeError("all shapes in a ShapeSet must share their kind")
        self.kind = kinds.pop() if kinds else "box"
        self.frame_id = frame_id
        self.scores = np.array([np.nan if s.score is None else s.score for s in shapes], float)
        self.classes = np.array([-1 if s.class_id is None else s.class_id for s in shapes], int)
        if self.kind == "box":
            self.boxes = np.array([s.box for s in shapes], float).reshape(-1, 4)
            self._shapes = None
        else:
            self.boxes = None
            self._shapes = shapes

    @classmethod
    def from_boxes(cls, boxes, scores=None, classes=None, frame_id=None,
                   validate: bool = True) -> "ShapeSet":
        boxes = np.asarray(boxes, float).reshape(-1, 4)
        n = len(boxes)
        scores = np.full(n, np.nan) if scores is None else np.asarray(scores, float).reshape(n)
        classes = np.full(n, -1) if classes is None else np.asarray(classes, int).reshape(n)
        if validate:
            if not np.isfinite(boxes).all():
                raise ShapeError("boxes must be finite")
            if not ((boxes[:, 0] < boxes[:, 2]) & (boxes[:, 1] < boxes[:, 3])).all():
                raise ShapeError("zero-area or inverted box in set")
            given = ~np.isnan(scores)
            if not ((scores[given] > 0) & (scores[given] <= 1)).all():
                raise ShapeError("scores must lie in (0, 1]")
        out = cls.__new__(cls)
        out.kind = "box"
        out.frame_id = frame_id
        out.boxes = boxes
        out.scores = scores
        out.classes = classes
        out._shapes = None
        return out

    def __len__(self) -> int:
        return len(self.boxes) if self.kind == "box" else len(self._shapes)

    def __getitem__(self, i: int) -> Shape:
        if self.kind == "mask":
            return self._shapes[i]
        s = self.scores[i]
        c = self.classes[i]
        return Shape(box=tuple(self.boxes[i]), score=None if np.isnan(s) else float(s),
                     class_id=None if c < 0 else int(c))

    def __iter__(self) -> Iterator[Shape]:
        for i in range(len(self)):
            yield self[i]

    def __repr__(self) -> str:
        return f"ShapeSet(kind={self.kind!r}, n={len(self)}, frame_id={self.frame_id!r})"

    @property
    def has_scores(self) -> bool:
        return bool(np.isfinite(self.scores).all())

    def subset(self, index) -> "ShapeSet":
        index = np.asarray(index)
        if self.kind == "box":
            return ShapeSet.from_boxes(self.boxes[index], self.scores[index],
                                       self.classes[index], self.frame_id, validate=False)
        picked = np.arange(len(self))[index]
        return ShapeSet([self._shapes[i] for i in picked], self.frame_id)

    def of_class(self, class_id: int) -> "ShapeSet":
        return self.subset(self.classes == class_id)

    def class_ids(self) -> list[int]:
        return sorted(int(c) for c in set(self.classes.tolist()))


def pairwise_distance(X: ShapeSet, Y: ShapeSet, base: str = "iou") -> np.ndarray:
    """``(|X|, |Y|)`` matrix of base distances.

    For augmented bases a missing score on a reference side is read as 1, since
    references carry full confidence.
    """
    base = check_base(base)
    m, n = len(X), len(Y)
    if m == 0 or n == 0:
        return np.zeros((m, n))
    if X.kind != Y.kind:
        raise ShapeError(f"cannot compare a {X.kind} set with a {Y.kind} set")
    if X.kind == "box":
        if base.startswith("augmented-"):
            sx = np.where(np.isnan(X.scores), 1.0, X.scores)
            sy = np.where(np.isnan(Y.scores), 1.0, Y.scores)
            return pairwise_box_distance(X.boxes, Y.boxes, base, sx, sy)
        return pairwise_box_distance(X.boxes, Y.boxes, base)
    kind = plain_base(base)
    out = np.empty((m, n))
    for i, a in enumerate(X):
        for j, b in enumerate(Y):
            out[i, j] = mask_distance(a, b, kind)
    return out
