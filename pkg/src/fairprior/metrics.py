"""Posterior quality and disparate impact measures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

KL_FLOOR = 1e-12


@dataclass(frozen=True)
class SensitiveGroups:
    """Boolean membership mask of the sensitive set S; S' is its complement."""

    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool).copy()
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_nodes(cls, node_count: int, sensitive) -> "SensitiveGroups":
        mask = np.zeros(node_count, dtype=bool)
        mask[list(sensitive)] = True
        return cls(mask)

    @property
    def node_count(self) -> int:
        return len(self.mask)

    @property
    def sensitive(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def nonsensitive(self) -> np.ndarray:
        return np.flatnonzero(~self.mask)

    @property
    def phi(self) -> float:
        return float(self.mask.mean())

    def swapped(self) -> "SensitiveGroups":
        return SensitiveGroups(~self.mask)


@dataclass(frozen=True)
class ObjectiveSpec:
    """``term(r_est, r) - w_prule * min(pRule(r_est), sup_prule)``; kind is ``mad`` or ``kl``."""

    kind: str = "kl"
    w_prule: float = 1.0
    sup_prule: float = 1.0

    def __post_init__(self):
        if self.kind not in ("mad", "kl"):
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.w_prule < 0:
            raise ValueError("w_prule must be non-negative")
        if not 0 < self.sup_prule <= 1:
            raise ValueError("sup_prule must lie in (0, 1]")


def as_index(nodes) -> np.ndarray:
    """Sorted integer index array from any node collection."""
    if isinstance(nodes, np.ndarray) and nodes.dtype == bool:
        return np.flatnonzero(nodes)
    return np.unique(np.fromiter(nodes, dtype=np.int64))


def auc(scores, labels, eval_nodes=None) -> float:
    """Mann-Whitney AUC over ``eval_nodes``; ties earn half credit."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    if eval_nodes is not None:
        idx = as_index(eval_nodes)
        scores, labels = scores[idx], labels[idx]
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative node")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def _group_masses(r, mask):
    n_s = int(mask.sum())
    n_ns = len(mask) - n_s
    if n_s == 0 or n_ns == 0:
        raise ValueError("both the sensitive and the non-sensitive group must be non-empty")
    r = np.asarray(r, dtype=float)
    return n_ns * r[mask].sum(axis=0), n_s * r[~mask].sum(axis=0)


def _ratio(a, b):
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    out = np.zeros_like(hi, dtype=float)
    np.divide(lo, hi, out=out, where=hi > 0)
    return out if out.ndim else float(out)


def prule(r, groups: SensitiveGroups):
    """Stochastic pRule; 0 when every score is zero. 2-D input gives one value per column."""
    return _ratio(*_group_masses(r, groups.mask))


def prule_on_subset(r, groups: SensitiveGroups, eval_nodes):
    idx = as_index(eval_nodes)
    return _ratio(*_group_masses(np.asarray(r, dtype=float)[idx], groups.mask[idx]))


def mad_term(r_est, r) -> float:
    """Mean absolute difference of max-normalized signals."""
    r_est = np.asarray(r_est, dtype=float)
    r = np.asarray(r, dtype=float)
    m_est, m = r_est.max(axis=0), r.max(axis=0)
    if np.any(m_est <= 0) or np.any(m <= 0):
        raise ValueError("signals need a positive maximum")
    if r_est.ndim == 2 and r.ndim == 1:
        r = r[:, None]
    return np.abs(r_est / m_est - r / m).mean(axis=0)


def kl_term(r_est, r):
    """KL divergence of the L1-normalized ``r_est`` from the L1-normalized ``r``.

    Zero entries of ``r_est`` contribute nothing; zero entries of ``r`` are
    replaced by ``KL_FLOOR`` so the divergence stays finite.
    """
    r_est = np.asarray(r_est, dtype=float)
    r = np.asarray(r, dtype=float)
    s_est, s = r_est.sum(axis=0), r.sum(axis=0)
    if np.any(s_est <= 0) or np.any(s <= 0):
        raise ValueError("signals need a positive sum")
    p_hat = r_est / s_est
    p = r / s
    p = np.where(p > 0, p, KL_FLOOR)
    if p_hat.ndim == 2 and p.ndim == 1:
        p = p[:, None]
    safe = np.where(p_hat > 0, p_hat, 1.0)
    return np.sum(np.where(p_hat > 0, p_hat * np.log(safe / p), 0.0), axis=0)


def objective(spec: ObjectiveSpec, r_est, r, groups: SensitiveGroups):
    """Fairness-aware loss, lower is better."""
    term = mad_term(r_est, r) if spec.kind == "mad" else kl_term(r_est, r)
    return term - spec.w_prule * np.minimum(prule(r_est, groups), spec.sup_prule)
