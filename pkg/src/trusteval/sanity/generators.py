"""Synthetic scenarios whose predictions have a known best-to-worst order.

Prediction ``k`` (1-based) is built from the reference with perturbations that
grow with ``k``: per-object dislocation, size noise and, from
``first_count_perturbed`` on, misses, false objects, class confusion and
identity swaps.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from ..geometry import ShapeSet, pairwise_box_distance
from ..setmetrics import TrackSet


def round_half_up(x) -> np.ndarray | int:
    """Nearest non-negative whole number, halves rounded up."""
    r = np.floor(np.maximum(np.asarray(x, float), 0.0) + 0.5).astype(int)
    return int(r) if r.ndim == 0 else r


@dataclass
class SanityScenario:
    reference: Any
    predictions: list
    ranks: np.ndarray
    params: dict = field(default_factory=dict)


def _boxes_from_centres(cx, cy, w, h) -> np.ndarray:
    return np.stack([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2], axis=-1)


def _centres(boxes: np.ndarray):
    cx = (boxes[..., 0] + boxes[..., 2]) / 2
    cy = (boxes[..., 1] + boxes[..., 3]) / 2
    return cx, cy, boxes[..., 2] - boxes[..., 0], boxes[..., 3] - boxes[..., 1]


def dislocation(magnitude: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Offsets of the given magnitudes: ``dx = u d``, ``dy`` fills the rest,
    then each component's sign is flipped with probability 1/2."""
    magnitude = np.asarray(magnitude, float)
    u = rng.random(magnitude.shape)
    dx = u * magnitude
    dy = np.sqrt(np.maximum(magnitude ** 2 - dx ** 2, 0.0))
    flip = rng.random(magnitude.shape + (2,)) < 0.5
    return np.where(flip[..., 0], -dx, dx), np.where(flip[..., 1], -dy, dy)


def perturb_boxes(boxes: np.ndarray, magnitude, size_noise, rng) -> np.ndarray:
    cx, cy, w, h = _centres(boxes)
    dx, dy = dislocation(np.broadcast_to(magnitude, cx.shape), rng)
    sw = rng.uniform(*size_noise, cx.shape)
    sh = rng.uniform(*size_noise, cx.shape)
    return _boxes_from_centres(cx + dx, cy + dy, w * sw, h * sh)


# ---------------------------------------------------------------------------
# detection


@dataclass(frozen=True)
class DetectionSanityConfig:
    n_objects: tuple[int, int] = (5, 40)
    centroid_range: tuple[float, float] = (-200.0, 200.0)
    size_range: tuple[float, float] = (20.0, 40.0)
    n_predictions: int = 20
    dislocation_range: tuple[float, float] = (10.0, 20.0)
    score_decay_range: tuple[float, float] = (0.2, 0.8)
    size_noise: tuple[float, float] = (0.95, 1.05)
    detection_prob_range: tuple[float, float] = (0.5, 0.95)
    classification_prob_range: tuple[float, float] = (0.5, 0.95)
    state_false_range: tuple[float, float] = (0.05, 0.5)
    random_false_rates: tuple[float, ...] = tuple(float(r) for r in range(1, 11))
    n_classes: int = 5
    first_count_perturbed: int = 11

    @property
    def n_count_perturbed(self) -> int:
        return max(self.n_predictions - self.first_count_perturbed + 1, 0)

    def __post_init__(self) -> None:
        if self.n_count_perturbed and len(self.random_false_rates) != self.n_count_perturbed:
            raise ValueError("need one random-false rate per count-perturbed prediction set")

    @classmethod
    def unperturbed(cls, **overrides) -> "DetectionSanityConfig":
        """Every prediction is an exact copy of the reference."""
        return cls(dislocation_range=(0.0, 0.0), score_decay_range=(0.0, 0.0),
                   size_noise=(1.0, 1.0), first_count_perturbed=10 ** 6, **overrides)


def sample_boxes(n: int, centroid_range, size_range, rng) -> np.ndarray:
    cx = rng.uniform(*centroid_range, n)
    cy = rng.uniform(*centroid_range, n)
    w = rng.uniform(*size_range, n)
    h = rng.uniform(*size_range, n)
    return _boxes_from_centres(cx, cy, w, h)


def gen_detection_scenario(cfg: DetectionSanityConfig = DetectionSanityConfig(),
                           class_mode: str = "single",
                           rng: np.random.Generator | None = None) -> SanityScenario:
    if class_mode not in ("single", "multi"):
        raise ValueError(f"class_mode must be 'single' or 'multi', got {class_mode!r}")
    rng = np.random.default_rng() if rng is None else rng
    multi = class_mode == "multi"
    n = int(rng.integers(cfg.n_objects[0], cfg.n_objects[1] + 1))
    ref_boxes = sample_boxes(n, cfg.centroid_range, cfg.size_range, rng)
    ref_classes = rng.integers(1, cfg.n_classes + 1, n) if multi else np.full(n, -1)
    labels = np.arange(1, n + 1)

    K = cfg.n_predictions
    D = np.linspace(*cfg.dislocation_range, K)
    S = np.linspace(*cfg.score_decay_range, K)
    m = cfg.n_count_perturbed
    P_D = np.sort(rng.uniform(*cfg.detection_prob_range, m))[::-1]
    P_C = np.sort(rng.uniform(*cfg.classification_prob_range, m))[::-1]
    F_S = np.sort(rng.uniform(*cfg.state_false_range, m))
    F_R = np.sort(rng.poisson(cfg.random_false_rates[:m])) if m else np.zeros(0, int)

    predictions, per_set = [], []
    for k in range(K):
        mag = D[k] / n * labels
        boxes = perturb_boxes(ref_boxes, mag, cfg.size_noise, rng)
        scores = 1.0 - S[k] / n * labels
        classes = ref_classes.copy()
        keep = np.ones(n, bool)
        extra_boxes = [np.zeros((0, 4))]
        extra_scores = [np.zeros(0)]
        extra_classes = [np.zeros(0, int)]
        info = {"k": k + 1, "dislocation_scale": float(D[k]), "score_decay": float(S[k])}
        j = k + 1 - cfg.first_count_perturbed
        if j >= 0:
            n_fr = min(round_half_up(n * F_S[j]), n)
            chosen = np.sort(rng.choice(n, n_fr, replace=False))
            extra_boxes.append(perturb_boxes(ref_boxes[chosen], mag[chosen], cfg.size_noise, rng))
            extra_scores.append(scores[chosen])
            extra_classes.append(ref_classes[chosen])

            rest = np.setdiff1d(np.arange(n), chosen)
            n_m = min(round_half_up((n - n_fr) * (1 - P_D[j])), len(rest))
            missed = rest[len(rest) - n_m:]
            keep[missed] = False
            pool = rest[:len(rest) - n_m]
            n_c = min(round_half_up((n - n_fr - n_m) * (1 - P_C[j])), len(pool))
            confused = pool[len(pool) - n_c:]
            if multi and cfg.n_classes > 1:
                shift = rng.integers(1, cfg.n_classes, len(confused))
                classes[confused] = (classes[confused] - 1 + shift) % cfg.n_classes + 1

            n_rf = int(F_R[j])
            extra_boxes.append(sample_boxes(n_rf, cfg.centroid_range, cfg.size_range, rng))
            extra_scores.append(1.0 - rng.random(n_rf))
            extra_classes.append(rng.integers(1, cfg.n_classes + 1, n_rf) if multi
                                 else np.full(n_rf, -1))
            info.update(state_false=int(n_fr), missed=int(n_m),
                        misclassified=int(n_c) if multi else 0, random_false=n_rf,
                        p_detect=float(P_D[j]), p_classify=float(P_C[j]),
                        state_false_fraction=float(F_S[j]))
        all_boxes = np.vstack([boxes[keep]] + extra_boxes)
        all_scores = np.concatenate([scores[keep]] + extra_scores)
        all_classes = np.concatenate([classes[keep]] + extra_classes)
        predictions.append(ShapeSet.from_boxes(
            all_boxes, all_scores if multi else None, all_classes, validate=False))
        per_set.append(info)

    reference = ShapeSet.from_boxes(ref_boxes, np.ones(n) if multi else None, ref_classes,
                                    validate=False)
    params = {"task": f"detect-{class_mode}", "n_objects": n, "predictions": per_set}
    return SanityScenario(reference, predictions, np.arange(1, K + 1), params)


# ---------------------------------------------------------------------------
# tracking


@dataclass(frozen=True)
class TrackingSanityConfig:
    window: int = 100
    n_tracks: tuple[int, int] = (5, 30)
    length_range: tuple[int, int] = (50, 100)
    centroid_range: tuple[float, float] = (-200.0, 200.0)
    height_range: tuple[float, float] = (20.0, 40.0)
    aspect_range: tuple[float, float] = (0.5, 1.5)
    speed_range: tuple[float, float] = (1.0, 5.0)
    course_range: tuple[float, float] = (0.0, 360.0)
    height_gain: float = 0.05
    n_predictions: int = 20
    dislocation_range: tuple[float, float] = (20.0, 40.0)
    size_noise: tuple[float, float] = (0.95, 1.05)
    miss_range: tuple[float, float] = (0.05, 1.0)
    state_false_range: tuple[float, float] = (0.05, 1.0)
    swap_range: tuple[float, float] = (0.05, 1.0)
    random_false_rates: tuple[float, ...] = tuple(float(r) for r in range(1, 11))
    false_track_length: int = 10
    first_count_perturbed: int = 11

    @property
    def n_count_perturbed(self) -> int:
        return max(self.n_predictions - self.first_count_perturbed + 1, 0)

    def __post_init__(self) -> None:
        if self.n_count_perturbed and len(self.random_false_rates) != self.n_count_perturbed:
            raise ValueError("need one random-false rate per count-perturbed prediction set")

    @classmethod
    def unperturbed(cls, **overrides) -> "TrackingSanityConfig":
        return cls(dislocation_range=(0.0, 0.0), size_noise=(1.0, 1.0),
                   first_count_perturbed=10 ** 6, **overrides)


def swap_likelihood(iou_percent, theta: float):
    """Piecewise-quadratic swap likelihood of two instances with mutual IoU
    ``iou_percent`` (in percent); 0 up to 15, 1 from ``theta`` on."""
    I = np.asarray(iou_percent, float)
    if theta <= 15:
        out = (I > 15).astype(float)
    else:
        z = np.clip((I - 15) / (theta - 15), 0.0, 1.0)
        out = np.where(z <= 0.5, 2 * z ** 2, 1 - 2 * (1 - z) ** 2)
    return float(out) if out.ndim == 0 else out


def _reference_tracks(cfg: TrackingSanityConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    T = cfg.window
    n = int(rng.integers(cfg.n_tracks[0], cfg.n_tracks[1] + 1))
    boxes = np.full((n, T, 4), np.nan)
    lo_h, hi_h = cfg.height_range
    lo_c, hi_c = cfg.centroid_range
    for i in range(n):
        length = int(rng.integers(cfg.length_range[0], min(cfg.length_range[1], T) + 1))
        start = int(rng.integers(0, T - length + 1))
        x0, y0 = rng.uniform(lo_c, hi_c, 2)
        h0 = hi_h - (y0 - lo_c) / (hi_c - lo_c) * (hi_h - lo_h)
        w = h0 * rng.uniform(*cfg.aspect_range)
        course = np.deg2rad(rng.uniform(*cfg.course_range))
        speed = rng.uniform(*cfg.speed_range)
        steps = np.arange(length)
        x = x0 + speed * np.cos(course) * steps
        y = y0 + speed * np.sin(course) * steps
        h = np.maximum(lo_h, h0 - cfg.height_gain * (y - y0))
        boxes[i, start:start + length] = _boxes_from_centres(x, y, np.full(length, w), h)
    return boxes, np.arange(1, T + 1)


def _random_false_tracks(count: int, cfg: TrackingSanityConfig, rng) -> np.ndarray:
    T = cfg.window
    L = min(cfg.false_track_length, T)
    out = np.full((count, T, 4), np.nan)
    for i in range(count):
        start = int(rng.integers(0, T - L + 1))
        out[i, start:start + L] = sample_boxes(L, cfg.centroid_range, cfg.height_range, rng)
    return out


def _apply_swaps(boxes: np.ndarray, theta: float, rng) -> int:
    """Swap instance states between predicted tracks, frame by frame, in
    descending order of mutual IoU; each track swaps at most once per frame."""
    swaps = 0
    for t in range(boxes.shape[1]):
        idx = np.flatnonzero(~np.isnan(boxes[:, t, 0]))
        if len(idx) < 2:
            continue
        iou = 100.0 * (1.0 - pairwise_box_distance(boxes[idx, t], boxes[idx, t], "iou"))
        a, b = np.triu_indices(len(idx), 1)
        vals = iou[a, b]
        hit = swap_likelihood(vals, theta) > 0.5
        if not hit.any():
            continue
        order = np.argsort(-vals[hit], kind="stable")
        used = set()
        for p, q in zip(a[hit][order], b[hit][order]):
            if p in used or q in used:
                continue
            used.update((p, q))
            i, j = idx[p], idx[q]
            boxes[[i, j], t] = boxes[[j, i], t]
            swaps += 1
    return swaps


def gen_tracking_scenario(cfg: TrackingSanityConfig = TrackingSanityConfig(),
                          rng: np.random.Generator | None = None) -> SanityScenario:
    rng = np.random.default_rng() if rng is None else rng
    ref, times = _reference_tracks(cfg, rng)
    n = len(ref)
    labels = np.arange(1, n + 1)
    present = ~np.isnan(ref[..., 0])

    K = cfg.n_predictions
    Tk = np.linspace(*cfg.dislocation_range, K)
    m = cfg.n_count_perturbed
    P_fr = np.sort(rng.uniform(*cfg.miss_range, m))
    P_sft = np.sort(rng.uniform(*cfg.state_false_range, m))
    P_id = np.sort(rng.uniform(*cfg.swap_range, m))[::-1]
    P_rft = np.sort(rng.poisson(cfg.random_false_rates[:m])) if m else np.zeros(0, int)

    predictions, per_set = [], []
    for k in range(K):
        mag = (Tk[k] / n * labels)[:, None] * np.ones(ref.shape[1])
        boxes = np.where(present[..., None], perturb_boxes(np.nan_to_num(ref), mag,
                                                           cfg.size_noise, rng), np.nan)
        extra = [np.zeros((0, ref.shape[1], 4))]
        info = {"k": k + 1, "dislocation_scale": float(Tk[k])}
        j = k + 1 - cfg.first_count_perturbed
        if j >= 0:
            n_sft = min(round_half_up(n * P_sft[j]), n)
            chosen = np.sort(rng.choice(n, n_sft, replace=False))
            sft = perturb_boxes(np.nan_to_num(ref[chosen]), mag[chosen], cfg.size_noise, rng)
            extra.append(np.where(present[chosen][..., None], sft, np.nan))

            missed = 0
            for t in range(ref.shape[1]):
                alive = np.flatnonzero(present[:, t])
                drop = round_half_up(len(alive) * P_fr[j])
                if drop:
                    boxes[alive[len(alive) - drop:], t] = np.nan
                    missed += drop
            swaps = _apply_swaps(boxes, 100.0 * P_id[j], rng)
            n_rft = int(P_rft[j])
            extra.append(_random_false_tracks(n_rft, cfg, rng))
            info.update(state_false_tracks=int(n_sft), missed_instances=int(missed),
                        swaps=int(swaps), random_false_tracks=n_rft,
                        p_miss=float(P_fr[j]), p_state_false=float(P_sft[j]),
                        swap_theta=float(100.0 * P_id[j]))
        all_boxes = np.concatenate([boxes] + extra, axis=0)
        # a track missed at every instant does not exist
        all_boxes = all_boxes[~np.isnan(all_boxes[..., 0]).all(axis=1)]
        predictions.append(TrackSet(list(range(1, len(all_boxes) + 1)), all_boxes, times))
        per_set.append(info)

    reference = TrackSet(labels.tolist(), ref, times)
    params = {"task": "track", "n_tracks": n, "predictions": per_set}
    return SanityScenario(reference, predictions, np.arange(1, K + 1), params)


# ---------------------------------------------------------------------------
# approximate truth and the shrinking-shift scenario


def _perturb_one(box: np.ndarray, min_iou: float, shift: float, scale, rng,
                 max_tries: int = 2_000) -> np.ndarray:
    cx, cy, w, h = _centres(box)
    for _ in range(max_tries):
        nx = cx + rng.uniform(-shift, shift) * w
        ny = cy + rng.uniform(-shift, shift) * h
        cand = _boxes_from_centres(nx, ny, w * rng.uniform(*scale), h * rng.uniform(*scale))
        if 1.0 - pairwise_box_distance(box, cand, "iou")[0, 0] >= min_iou:
            return cand
    raise ValueError(f"no perturbation reached IoU {min_iou} after {max_tries} draws; "
                     "lower min_iou or narrow the shift and scale ranges")


def perturb_boxes_to_iou(boxes: np.ndarray, min_iou: float = 0.9, rng=None,
                         shift: float = 0.1, scale=(0.95, 1.05)) -> np.ndarray:
    """Rejection-sample a perturbed copy of each box with IoU at least ``min_iou``."""
    boxes = np.asarray(boxes, float)
    if min_iou >= 1.0:
        return boxes.copy()
    rng = np.random.default_rng() if rng is None else rng
    out = boxes.copy()
    flat = out.reshape(-1, 4)
    for i, b in enumerate(boxes.reshape(-1, 4)):
        if not np.isnan(b[0]):
            flat[i] = _perturb_one(b, min_iou, shift, scale, rng)
    return out


def perturb_to_approximate_truth(reference, min_iou: float = 0.9, rng=None):
    """An annotation-like copy of a ShapeSet or TrackSet."""
    if isinstance(reference, TrackSet):
        return TrackSet(reference.labels, perturb_boxes_to_iou(reference.boxes, min_iou, rng),
                        reference.times)
    if reference.kind != "box":
        raise ValueError("approximate truth is generated for boxes only")
    return ShapeSet.from_boxes(perturb_boxes_to_iou(reference.boxes, min_iou, rng),
                               reference.scores, reference.classes, reference.frame_id,
                               validate=False)


FIG8_SIDE = 10.0
FIG8_PITCH = 31.0


def fig8_shift(k: int) -> float:
    return 2.0 ** (-0.5 * k)


def fig8_closed_form(k: int) -> float:
    """IoU distance between a 10-pixel square and its copy shifted by ``2^(-k/2)``."""
    d = fig8_shift(k)
    return 2 * d / (FIG8_SIDE + d)


def fig8_scenario(k: int) -> tuple[ShapeSet, ShapeSet]:
    """``2^k`` well-separated squares and the same squares shifted left."""
    if not 1 <= k <= 10:
        raise ValueError(f"k must lie in 1..10, got {k}")
    n = 2 ** k
    cols = int(np.ceil(np.sqrt(n)))
    idx = np.arange(n)
    x = (idx % cols) * FIG8_PITCH
    y = (idx // cols) * FIG8_PITCH
    ref = np.stack([x, y, x + FIG8_SIDE, y + FIG8_SIDE], axis=1)
    pred = ref - np.array([fig8_shift(k), 0.0, fig8_shift(k), 0.0])
    return ShapeSet.from_boxes(ref), ShapeSet.from_boxes(pred)


def config_dict(cfg) -> dict:
    return asdict(cfg)
