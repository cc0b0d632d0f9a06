"""Derivative-free cyclic coordinate search with shrinking ranges.

A single-rectangle variant of divided rectangles: each coordinate in turn
is probed on ``2 * partitions + 1`` evenly spaced points around the current
center, the center moves to the best point, and that coordinate's search
radius is divided by ``contraction``. The search stops once every
coordinate's last sweep spread its losses by no more than ``tolerance``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np


@dataclass(frozen=True)
class OptimizerSettings:
    partitions: int = 2
    contraction: float = 2.0
    tolerance: float = 0.01
    max_evaluations: int = 10_000

    def __post_init__(self):
        if self.partitions < 1:
            raise ValueError("partitions must be >= 1")
        if self.contraction <= 1:
            raise ValueError("contraction must exceed 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_evaluations < 1:
            raise ValueError("max_evaluations must be positive")


class SearchResult(NamedTuple):
    x: np.ndarray
    fun: float
    evaluations: int
    trace: list  # (point, loss) in evaluation order


class BudgetExhausted(RuntimeError):
    def __init__(self, best: SearchResult):
        super().__init__(
            f"evaluation budget of {best.evaluations} exhausted; best loss so far {best.fun:.6g}"
        )
        self.best = best


def minimize(
    loss: Callable,
    lower,
    upper,
    settings: OptimizerSettings | None = None,
    *,
    vectorized: bool = False,
) -> SearchResult:
    """Minimize ``loss`` over the box ``[lower, upper]``.

    With ``vectorized=True`` the loss receives an ``(m, K)`` array of points
    and returns ``m`` losses, letting one coordinate sweep run as a batch.
    Candidates are clamped to the box and each distinct point is evaluated
    once.
    """
    settings = settings or OptimizerSettings()
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != upper.shape or np.any(lower >= upper):
        raise ValueError("need lower < upper elementwise")
    K = len(lower)
    part = settings.partitions

    cache: dict[tuple, float] = {}
    trace: list = []

    theta = (lower + upper) / 2
    width = upper - lower
    err = np.full(K, np.inf)

    def evaluate(points):
        fresh = [p for p in dict.fromkeys(tuple(p) for p in points) if p not in cache]
        if len(cache) + len(fresh) > settings.max_evaluations:
            center = tuple(theta)
            raise BudgetExhausted(SearchResult(theta.copy(), cache.get(center, np.inf), len(cache), trace))
        if fresh:
            if vectorized:
                values = np.asarray(loss(np.array(fresh)), dtype=float).reshape(-1)
            else:
                values = [float(loss(np.array(p))) for p in fresh]
            for p, v in zip(fresh, values):
                cache[p] = float(v)
                trace.append((np.array(p), float(v)))
        return [cache[tuple(p)] for p in points]

    i = 0
    while err.max() > settings.tolerance:
        offsets = width[i] * (np.arange(2 * part + 1) / part - 1)
        coords = list(dict.fromkeys(np.clip(theta[i] + offsets, lower[i], upper[i])))
        points = []
        for c in coords:
            point = theta.copy()
            point[i] = c
            points.append(point)
        values = evaluate(points)
        best = min(values)
        current = coords.index(theta[i])
        # stay put on ties; otherwise the lowest-offset minimizer wins
        chosen = current if values[current] == best else values.index(best)
        theta = points[chosen]
        err[i] = max(values) - best
        width[i] /= settings.contraction
        i = (i + 1) % K

    return SearchResult(theta, cache[tuple(theta)], len(cache), trace)
