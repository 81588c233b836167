"""Combinatorial solvers behind the set metrics and matching-based criteria."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class Matching:
    pairs: list[tuple[int, int]]
    unmatched_rows: list[int] = field(default_factory=list)
    unmatched_cols: list[int] = field(default_factory=list)

    @classmethod
    def from_pairs(cls, pairs, m: int, n: int) -> "Matching":
        pairs = sorted((int(i), int(j)) for i, j in pairs)
        rows = {i for i, _ in pairs}
        cols = {j for _, j in pairs}
        return cls(pairs, [i for i in range(m) if i not in rows],
                   [j for j in range(n) if j not in cols])

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def rows(self) -> np.ndarray:
        return np.array([i for i, _ in self.pairs], dtype=int)

    @property
    def cols(self) -> np.ndarray:
        return np.array([j for _, j in self.pairs], dtype=int)


def _as_cost(c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.ndim != 2:
        c = c.reshape(len(c), -1) if c.size else np.zeros((len(c), 0))
    return c


def solve_assignment(c) -> tuple[Matching, float]:
    """Minimum-cost matching of size ``min(m, n)`` on a rectangular cost matrix."""
    c = _as_cost(c)
    m, n = c.shape
    if m == 0 or n == 0:
        return Matching.from_pairs([], m, n), 0.0
    rows, cols = linear_sum_assignment(c)
    return Matching.from_pairs(zip(rows, cols), m, n), float(c[rows, cols].sum())


def assignment_cost(c) -> float:
    c = _as_cost(c)
    if c.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(c)
    return float(c[rows, cols].sum())


def thresholded_matching(c, max_cost: float, atol: float = 1e-9) -> Matching:
    """Largest matching using only edges with ``cost <= max_cost``; among those,
    the one of least total cost."""
    c = _as_cost(c)
    return max_cardinality_matching(c, c <= max_cost + atol)


def max_cardinality_matching(c, feasible) -> Matching:
    """Largest matching on the ``feasible`` edges, least total cost among those.

    Costs on feasible edges must lie in ``[0, 1]``.
    """
    c = _as_cost(c)
    m, n = c.shape
    if m == 0 or n == 0 or not feasible.any():
        return Matching.from_pairs([], m, n)
    # an infeasible edge outweighs every sum of feasible costs (each <= 1)
    big = float(min(m, n)) + 2.0
    work = np.where(feasible, c, big)
    rows, cols = linear_sum_assignment(work)
    keep = feasible[rows, cols]
    return Matching.from_pairs(zip(rows[keep], cols[keep]), m, n)


def greedy_match(c, row_priority, threshold: float, atol: float = 1e-9) -> Matching:
    """Score-ordered greedy matching.

    Rows are visited by descending priority (ties by row index); each takes its
    cheapest still-free column whose cost is within ``threshold``.
    """
    c = _as_cost(c)
    m, n = c.shape
    prio = np.asarray(row_priority, dtype=float)
    if len(prio) != m:
        raise ValueError(f"row_priority has {len(prio)} entries for {m} rows")
    taken = np.zeros(n, dtype=bool)
    pairs = []
    for i in np.argsort(-prio, kind="stable"):
        if n == 0:
            break
        row = np.where(taken | (c[i] > threshold + atol), np.inf, c[i])
        j = int(np.argmin(row))
        if np.isfinite(row[j]):
            taken[j] = True
            pairs.append((int(i), j))
    return Matching.from_pairs(pairs, m, n)


# ---------------------------------------------------------------------------
# transportation


def _network_simplex():
    # keep POT from probing torch/tensorflow/jax, which it never needs here
    for name in ("PYTORCH", "TENSORFLOW", "JAX", "CUPY"):
        os.environ.setdefault(f"POT_BACKEND_DISABLE_{name}", "1")
    import ot

    return ot.emd


@dataclass(frozen=True)
class TransportPlan:
    """Mass ``plan[i, j]`` moved from row ``i`` to column ``j``; rows carry
    ``1/m`` each and columns receive ``1/n`` each."""

    plan: np.ndarray

    @property
    def row_sums(self) -> np.ndarray:
        return self.plan.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.plan.sum(axis=0)


def solve_transport(c) -> tuple[TransportPlan, float]:
    """Optimal transport between uniform masses on rows and columns.

    Solved as an integer transportation problem: each row supplies ``n`` units
    and each column demands ``m``, so every basic solution is integral. The
    plan and cost are scaled back by ``1 / (m n)``.
    """
    c = _as_cost(c)
    m, n = c.shape
    if m == 0 or n == 0:
        raise ValueError("transport needs at least one row and one column")
    if m == 1 or n == 1:
        # single supplier or single consumer: the plan is forced
        units = np.ones((m, n))
    else:
        emd = _network_simplex()
        units = emd(np.full(m, float(n)), np.full(n, float(m)), np.ascontiguousarray(c),
                    numItermax=max(100000, 50 * m * n))
        units = np.rint(units)
    total = float((units * c).sum()) / (m * n)
    return TransportPlan(units / (m * n)), total
