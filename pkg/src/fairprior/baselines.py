"""Fairness baselines that do not edit priors."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .graph import Graph, NormalizedAdjacency
from .metrics import SensitiveGroups, prule


def mult(r, groups: SensitiveGroups) -> np.ndarray:
    """Rescale each group so sensitive mass is ``phi`` and the rest ``1 - phi``."""
    r = np.asarray(r, dtype=float)
    mask = groups.mask
    mass_s, mass_ns = r[mask].sum(), r[~mask].sum()
    if mass_s <= 0 or mass_ns <= 0:
        raise ValueError("both groups need positive score mass to rebalance")
    phi = groups.phi
    return np.where(mask, phi / mass_s, (1 - phi) / mass_ns) * r


def lfpro(r, groups: SensitiveGroups, tol: float = 1e-12, return_trace: bool = False):
    """Move excess score from the over-represented group to the other one.

    Each step takes equal shares from the donor group's positive scores,
    capped by the smallest of them so nothing goes negative, and hands the
    same total out in equal shares to the receiving group. Total mass is
    unchanged and each group moves as little as an even shift allows.
    Steps repeat until an uncapped one transfers at most ``tol``.
    """
    r = np.array(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("scores must be non-negative")
    mask = groups.mask
    phi = groups.phi
    trace = [prule(r, groups)]
    for _ in range(100_000):
        excess = r[mask].sum() - phi * r.sum()
        donor = mask if excess > 0 else ~mask
        active = donor & (r > 0)
        k = int(active.sum())
        if k == 0:
            break
        share, floor = abs(excess) / k, r[active].min()
        take = min(share, floor)
        moved = take * k
        # a capped step empties its smallest donors, so the next step can move more
        if moved <= tol and share <= floor:
            break
        r[active] -= take
        r[~donor] += moved / int((~donor).sum())
        trace.append(prule(r, groups))
    r = np.maximum(r, 0.0)
    return (r, trace) if return_trace else r


def fairwalk_normalize(graph: Graph, groups: SensitiveGroups) -> NormalizedAdjacency:
    """Column-stochastic operator splitting each node's outflow evenly between groups.

    A node with neighbors in both groups sends half of its weight to its
    sensitive neighbors and half to the rest, equally within each half;
    single-group neighborhoods fall back to ordinary column normalization.
    """
    adj = graph.adjacency.tocoo()
    src, dst = adj.col, adj.row  # weight W[dst, src] carries src -> dst
    n = graph.node_count
    mask = groups.mask
    to_sensitive = mask[dst]
    n_s = np.bincount(src, weights=to_sensitive, minlength=n)
    n_ns = np.bincount(src, weights=~to_sensitive, minlength=n)
    mixed = (n_s > 0) & (n_ns > 0)
    deg = n_s + n_ns
    weight = np.where(
        mixed[src],
        np.where(to_sensitive, 0.5 / np.maximum(n_s[src], 1), 0.5 / np.maximum(n_ns[src], 1)),
        1.0 / np.maximum(deg[src], 1),
    )
    mat = sp.csr_matrix((weight, (dst, src)), shape=(n, n))
    return NormalizedAdjacency("column", mat)
