"""Metrics between finite sets of shapes and between sets of tracks.

All metrics here take a base distance bounded by 1, which is what makes the
empty-set conventions (distance 1, or ``c`` for OSPA, when exactly one side is
empty) consistent with the metric axioms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .assignment import assignment_cost, solve_transport
from .geometry import (
    Shape,
    ShapeError,
    ShapeSet,
    box_distance,
    check_base,
    pairwise_distance,
    plain_base,
)


@dataclass(frozen=True)
class MetricConfig:
    """Base distance, OSPA order ``p`` and cut-off ``c``."""

    base: str = "iou"
    p: float = 1.0
    c: float = 1.0

    def __post_init__(self) -> None:
        check_base(self.base)
        if not self.p >= 1:
            raise ValueError(f"order p must be >= 1, got {self.p}")
        if not 0 < self.c <= 1:
            raise ValueError(f"cut-off c must lie in (0, 1], got {self.c}")


DEFAULT = MetricConfig()


# ---------------------------------------------------------------------------
# metrics on a precomputed base-distance matrix


def hausdorff_from_distances(d: np.ndarray) -> float:
    m, n = d.shape
    if m == 0 and n == 0:
        return 0.0
    if m == 0 or n == 0:
        return 1.0
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def emd_from_distances(d: np.ndarray, p: float = 1.0) -> float:
    m, n = d.shape
    if m == 0 and n == 0:
        return 0.0
    if m == 0 or n == 0:
        return 1.0
    _, cost = solve_transport(d ** p if p != 1 else d)
    return float(cost ** (1.0 / p)) if p != 1 else cost


def _ospa_total(d: np.ndarray, c: float, p: float) -> tuple[float, int]:
    """Optimal-assignment sum of cut distances plus the cardinality penalty,
    together with the larger cardinality."""
    m, n = d.shape
    if m > n:
        d = d.T
        m, n = n, m
    cut = np.minimum(d, c)
    if p != 1:
        cut = cut ** p
    return assignment_cost(cut) + (c ** p) * (n - m), n


def ospa_from_distances(d: np.ndarray, c: float = 1.0, p: float = 1.0) -> float:
    m, n = d.shape
    if m == 0 and n == 0:
        return 0.0
    if m == 0 or n == 0:
        return float(c)
    total, big = _ospa_total(d, c, p)
    return float((total / big) ** (1.0 / p)) if p != 1 else total / big


def ospa_unnormalized_from_distances(d: np.ndarray, c: float = 1.0, p: float = 1.0) -> float:
    m, n = d.shape
    if m == 0 and n == 0:
        return 0.0
    total, _ = _ospa_total(d, c, p)
    return float(total ** (1.0 / p)) if p != 1 else float(total)


def ospa_components(d: np.ndarray, c: float = 1.0) -> tuple[float, float]:
    """Order-1 OSPA split into its localisation and cardinality terms."""
    m, n = d.shape
    big = max(m, n)
    if big == 0:
        return 0.0, 0.0
    small = min(m, n)
    loc = assignment_cost(np.minimum(d if m <= n else d.T, c)) if small else 0.0
    return loc / big, c * (big - small) / big


# ---------------------------------------------------------------------------
# shape sets


def _distances(X: ShapeSet, Y: ShapeSet, cfg: MetricConfig) -> np.ndarray:
    if len(X) and len(Y) and X.kind != Y.kind:
        raise ShapeError(f"cannot compare a {X.kind} set with a {Y.kind} set")
    return pairwise_distance(X, Y, cfg.base)


def hausdorff(X: ShapeSet, Y: ShapeSet, cfg: MetricConfig = DEFAULT) -> float:
    return hausdorff_from_distances(_distances(X, Y, cfg))


def emd(X: ShapeSet, Y: ShapeSet, cfg: MetricConfig = DEFAULT) -> float:
    """Wasserstein distance of order ``cfg.p`` (EMD for ``p = 1``)."""
    return emd_from_distances(_distances(X, Y, cfg), cfg.p)


def ospa(X: ShapeSet, Y: ShapeSet, cfg: MetricConfig = DEFAULT) -> float:
    return ospa_from_distances(_distances(X, Y, cfg), cfg.c, cfg.p)


def ospa_unnormalized(X: ShapeSet, Y: ShapeSet, cfg: MetricConfig = DEFAULT) -> float:
    """OSPA without dividing by the larger cardinality.

    It satisfies the metric axioms but is not a meaningful criterion: its value
    grows with the number of objects.
    """
    return ospa_unnormalized_from_distances(_distances(X, Y, cfg), cfg.c, cfg.p)


# ---------------------------------------------------------------------------
# tracks


@dataclass(frozen=True, eq=False)
class Track:
    """A labelled map from time steps to boxes; its domain need not be an interval."""

    label: object
    states: Mapping[int, Shape]

    def __post_init__(self) -> None:
        for t, s in self.states.items():
            if s.kind != "box":
                raise ShapeError("tracks hold boxes only")
        object.__setattr__(self, "states", dict(sorted(self.states.items())))

    @property
    def domain(self) -> list[int]:
        return list(self.states)


class TrackSet:
    """Tracks on a shared window, held densely.

    ``boxes[i, k]`` is the state of track ``i`` at time ``times[k]``, or NaN
    where the track does not exist.
    """

    def __init__(self, labels: Sequence, boxes: np.ndarray, times: Sequence[int]):
        labels = list(labels)
        if len(set(labels)) != len(labels):
            raise ValueError("track labels must be unique within a set")
        times = np.asarray(times, dtype=int)
        boxes = np.asarray(boxes, dtype=float).reshape(len(labels), len(times), 4)
        if len(times) > 1 and not (np.diff(times) > 0).all():
            raise ValueError("window time steps must be strictly increasing")
        self.labels = labels
        self.boxes = boxes
        self.times = times

    @classmethod
    def empty(cls, times: Sequence[int] = ()) -> "TrackSet":
        return cls([], np.zeros((0, len(times), 4)), times)

    @classmethod
    def from_tracks(cls, tracks: Iterable[Track], window: Sequence[int] | None = None) -> "TrackSet":
        tracks = list(tracks)
        if window is None:
            window = sorted({t for tr in tracks for t in tr.states})
        times = np.asarray(window, dtype=int)
        col = {int(t): k for k, t in enumerate(times)}
        boxes = np.full((len(tracks), len(times), 4), np.nan)
        for i, tr in enumerate(tracks):
            for t, s in tr.states.items():
                if t not in col:
                    raise ValueError(f"track {tr.label!r} has state at {t} outside the window")
                boxes[i, col[t]] = s.box
        return cls([tr.label for tr in tracks], boxes, times)

    def __len__(self) -> int:
        return len(self.labels)

    def __repr__(self) -> str:
        return f"TrackSet(n={len(self)}, window={len(self.times)} steps)"

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.boxes[..., 0])

    def tracks(self) -> list[Track]:
        out = []
        for i, label in enumerate(self.labels):
            ks = np.flatnonzero(~np.isnan(self.boxes[i, :, 0]))
            out.append(Track(label, {int(self.times[k]): Shape(box=tuple(self.boxes[i, k]))
                                     for k in ks}))
        return out

    def frame(self, t: int) -> ShapeSet:
        k = int(np.searchsorted(self.times, t))
        if k >= len(self.times) or self.times[k] != t:
            return ShapeSet.from_boxes(np.zeros((0, 4)), frame_id=t)
        keep = ~np.isnan(self.boxes[:, k, 0])
        return ShapeSet.from_boxes(self.boxes[keep, k], frame_id=t, validate=False)

    def on_window(self, times: Sequence[int]) -> "TrackSet":
        """The same tracks re-expressed on a (super-)window."""
        times = np.asarray(times, dtype=int)
        boxes = np.full((len(self), len(times), 4), np.nan)
        if not np.isin(self.times, times).all():
            raise ValueError("new window must contain the current one")
        pos = np.searchsorted(times, self.times)
        boxes[:, pos] = self.boxes
        return TrackSet(self.labels, boxes, times)


def align(F: TrackSet, G: TrackSet) -> tuple[TrackSet, TrackSet]:
    """Re-window both sets to the union of their time steps."""
    if np.array_equal(F.times, G.times):
        return F, G
    times = np.union1d(F.times, G.times)
    return F.on_window(times), G.on_window(times)


def framewise_distances(F: TrackSet, G: TrackSet, base: str = "iou") -> np.ndarray:
    """``(|F|, |G|, T)`` per-instant base distances, NaN unless both tracks exist."""
    if check_base(base).startswith("augmented-"):
        raise ValueError("track states carry no scores; use 'iou' or 'giou'")
    F, G = align(F, G)
    a = F.boxes[:, None, :, :]
    b = G.boxes[None, :, :, :]
    with np.errstate(invalid="ignore"):
        return box_distance(a, b, plain_base(base))


def track_distances_from_framewise(d: np.ndarray, present_f: np.ndarray,
                                   present_g: np.ndarray, c: float = 1.0) -> np.ndarray:
    """Time-averaged single-state OSPA between every pair of tracks."""
    both = present_f[:, None, :] & present_g[None, :, :]
    either = present_f[:, None, :] | present_g[None, :, :]
    cut = np.where(both, np.minimum(np.nan_to_num(d, nan=c), c), 0.0)
    num = cut.sum(axis=2) + c * (either & ~both).sum(axis=2)
    den = either.sum(axis=2)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def track_distance_matrix(F: TrackSet, G: TrackSet, cfg: MetricConfig = DEFAULT) -> np.ndarray:
    F, G = align(F, G)
    d = framewise_distances(F, G, cfg.base)
    return track_distances_from_framewise(d, F.present, G.present, cfg.c)


def track_base_distance(f: Track, g: Track, cfg: MetricConfig = DEFAULT) -> float:
    """Mean over ``D_f ∪ D_g`` of the single-state OSPA between ``f`` and ``g``."""
    F = TrackSet.from_tracks([f])
    G = TrackSet.from_tracks([g])
    return float(track_distance_matrix(F, G, cfg)[0, 0])


def ospa2(F: TrackSet, G: TrackSet, cfg: MetricConfig = DEFAULT) -> float:
    """OSPA over sets of tracks with the time-averaged track distance as base."""
    return ospa_from_distances(track_distance_matrix(F, G, cfg), cfg.c, cfg.p)


def hausdorff_tracks(F: TrackSet, G: TrackSet, cfg: MetricConfig = DEFAULT) -> float:
    return hausdorff_from_distances(track_distance_matrix(F, G, cfg))


def emd_tracks(F: TrackSet, G: TrackSet, cfg: MetricConfig = DEFAULT) -> float:
    return emd_from_distances(track_distance_matrix(F, G, cfg), cfg.p)
