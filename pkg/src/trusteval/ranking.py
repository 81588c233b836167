"""Ranks, normalized Kendall-tau distance and rank-stability indicators.

A rank matrix has one row per algorithm and one column per parameter value
(typically a threshold); every column is a permutation of ``1..K``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


def ranks_from_scores(scores: Sequence[float], direction: str = "higher-better") -> np.ndarray:
    """Ordinal ranks ``1..K``; equal scores are ranked by position."""
    s = np.asarray(scores, dtype=float)
    if s.ndim != 1 or len(s) == 0:
        raise ValueError("need a non-empty 1-D score vector")
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    if direction == "higher-better":
        key = -s
    elif direction == "lower-better":
        key = s
    else:
        raise ValueError(f"direction must be 'higher-better' or 'lower-better', got {direction!r}")
    order = np.argsort(key, kind="stable")
    ranks = np.empty(len(s), dtype=int)
    ranks[order] = np.arange(1, len(s) + 1)
    return ranks


def kendall_tau_normalized(a: Sequence[int], b: Sequence[int]) -> float:
    """Fraction of item pairs ordered differently by ``a`` and ``b``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"rank vectors differ in shape: {a.shape} vs {b.shape}")
    k = len(a)
    if k < 2:
        raise ValueError("need at least two items")
    da = np.sign(a[:, None] - a[None, :])
    db = np.sign(b[:, None] - b[None, :])
    discordant = np.count_nonzero(np.triu(da * db < 0, 1))
    return discordant / (k * (k - 1) / 2)


def _as_rank_matrix(R) -> np.ndarray:
    R = np.asarray(R)
    if R.ndim != 2 or R.shape[1] < 1:
        raise ValueError("rank matrix must be 2-D with at least one column")
    return R


def avg_rank_switches(R) -> float:
    """Mean over algorithms of the number of distinct ranks held, minus one."""
    R = _as_rank_matrix(R)
    return float(np.mean([len(np.unique(row)) - 1 for row in R]))


def avg_rank_distortion(R) -> float:
    """Mean over algorithms of the population standard deviation of their ranks."""
    R = _as_rank_matrix(R)
    return float(np.mean(np.std(R.astype(float), axis=1)))


def avg_rank_sensitivity(R, thresholds: Sequence[float] | None = None,
                         evenly_spaced: bool = False) -> float:
    """Summed absolute rank change per unit of parameter, over ``(m - 1) K``.

    With ``evenly_spaced`` the spacing factor is dropped, which is what to use
    when only the order of the parameter values matters.
    """
    R = _as_rank_matrix(R).astype(float)
    k, m = R.shape
    if m < 2:
        raise ValueError("sensitivity needs at least two parameter values")
    if evenly_spaced:
        step = np.ones(m - 1)
    else:
        if thresholds is None:
            raise ValueError("thresholds are required unless evenly_spaced is set")
        t = np.asarray(thresholds, dtype=float)
        if t.shape != (m,):
            raise ValueError(f"expected {m} thresholds, got {t.shape}")
        step = np.diff(t)
        if not (step > 0).all():
            raise ValueError("thresholds must be strictly increasing")
    change = np.abs(np.diff(R, axis=1)) / (step[None, :] * (m - 1) * k)
    return float(change.sum())


def reliability(R, thresholds: Sequence[float] | None = None,
                evenly_spaced: bool = False) -> dict[str, float]:
    return {
        "switches": avg_rank_switches(R),
        "distortion": avg_rank_distortion(R),
        "sensitivity": avg_rank_sensitivity(R, thresholds, evenly_spaced),
    }
