"""Friedman test and Nemenyi post-hoc comparison of several approaches."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy.stats import chi2, rankdata

FRIEDMAN_ALPHA = 0.001

# two-tailed studentized range quantiles at alpha = 0.05 divided by sqrt(2), k = 2..10
NEMENYI_Q05 = {
    2: 1.960,
    3: 2.343,
    4: 2.569,
    5: 2.728,
    6: 2.850,
    7: 2.949,
    8: 3.031,
    9: 3.102,
    10: 3.164,
}


class FriedmanResult(NamedTuple):
    statistic: float
    pvalue: float
    reject: bool
    alpha: float


class NemenyiResult(NamedTuple):
    avg_ranks: np.ndarray
    critical_difference: float

    def significant(self, i: int, j: int) -> bool:
        return abs(self.avg_ranks[i] - self.avg_ranks[j]) > self.critical_difference


def _matrix(scores) -> np.ndarray:
    m = np.asarray(scores, dtype=float)
    if m.ndim != 2:
        raise ValueError("score matrix must be two-dimensional")
    if np.isnan(m).any():
        raise ValueError("score matrix has missing cells")
    return m


def rank_rows(scores) -> np.ndarray:
    """Rank approaches within each row; 1 is the highest value, ties share the average rank."""
    return rankdata(-_matrix(scores), axis=1)


def average_ranks(scores) -> np.ndarray:
    return rank_rows(scores).mean(axis=0)


def friedman(scores, alpha: float = FRIEDMAN_ALPHA) -> FriedmanResult:
    m = _matrix(scores)
    n, k = m.shape
    if k < 3 or n < 2:
        raise ValueError(f"Friedman test needs k >= 3 approaches and N >= 2 settings, got k={k}, N={n}")
    rbar = average_ranks(m)
    stat = 12 * n / (k * (k + 1)) * (np.sum(rbar**2) - k * (k + 1) ** 2 / 4)
    stat = max(float(stat), 0.0)
    p = float(chi2.sf(stat, k - 1))
    return FriedmanResult(stat, p, p < alpha, alpha)


def critical_difference(k: int, n: int, alpha: float = 0.05) -> float:
    if alpha != 0.05 or k not in NEMENYI_Q05:
        raise ValueError(f"Nemenyi table covers alpha=0.05 and 2 <= k <= 10, got alpha={alpha}, k={k}")
    return NEMENYI_Q05[k] * math.sqrt(k * (k + 1) / (6 * n))


def nemenyi(scores, alpha: float = 0.05) -> NemenyiResult:
    m = _matrix(scores)
    n, k = m.shape
    return NemenyiResult(average_ranks(m), critical_difference(k, n, alpha))
