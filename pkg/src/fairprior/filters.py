"""Graph filters over normalized adjacency operators.

Signals may be 1-D (one prior) or 2-D with one prior per column; every
operation here works column-wise so that several priors can share one
propagation pass.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import stats

from .graph import NormalizedAdjacency

LAMBDA_SAMPLES = 10001


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class FilterSpec:
    """Filter family, its parameter and the post-processing applied to its output.

    ``family`` is ``"ppr"`` (parameter ``a`` in (0, 1)) or ``"heat"``
    (parameter ``t`` > 0); ``sweep`` divides by the non-personalized output.
    """

    family: str
    parameter: float
    sweep: bool = False
    tolerance: float = 1e-9

    def __post_init__(self):
        if self.family == "ppr":
            if not 0 < self.parameter < 1:
                raise ValueError("personalized pagerank needs 0 < a < 1")
        elif self.family == "heat":
            if self.parameter <= 0:
                raise ValueError("heat kernel needs t > 0")
        else:
            raise ValueError(f"unknown filter family {self.family!r}")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")

    @property
    def name(self) -> str:
        if self.family == "ppr":
            base = "PPR" + repr(float(self.parameter)).lstrip("0")
        else:
            t = self.parameter
            base = "HK" + (str(int(t)) if float(t).is_integer() else repr(float(t)))
        return base + ("S" if self.sweep else "")

    @classmethod
    def parse(cls, name: str, tolerance: float = 1e-9) -> "FilterSpec":
        """Parse names such as ``PPR.85``, ``HK7`` or ``PPR.99S``."""
        m = re.fullmatch(r"PPR(\.\d+)(S?)", name)
        if m:
            return cls("ppr", float(m.group(1)), bool(m.group(2)), tolerance)
        m = re.fullmatch(r"HK(\d+(?:\.\d+)?)(S?)", name)
        if m:
            return cls("heat", float(m.group(1)), bool(m.group(2)), tolerance)
        raise ValueError(f"unrecognized filter name {name!r}")

    def __str__(self):
        return self.name


BENCHMARK_FILTERS = ("PPR.85", "PPR.99", "HK3", "HK7", "PPR.85S", "PPR.99S", "HK3S", "HK7S")


def _as_signal(W: NormalizedAdjacency, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape[0] != W.node_count:
        raise ValueError(f"signal length {q.shape[0]} does not match {W.node_count} nodes")
    return q


def ppr(W: NormalizedAdjacency, q, a: float, tol: float = 1e-9) -> np.ndarray:
    """Personalized pagerank by power iteration of ``r <- aWr + (1-a)q``.

    Iterates until the max-norm step falls below ``tol * (1-a) / a``, which
    keeps the geometric remainder of the series under ``tol``.
    """
    if not 0 < a < 1:
        raise ValueError("a must lie in (0, 1)")
    q = _as_signal(W, q)
    if not np.all(np.isfinite(q)):
        raise ValueError("prior must be finite")
    cap = 10 * max(1, math.ceil(math.log(tol) / math.log(a)))
    threshold = tol * (1 - a) / a
    mat = W.matrix
    base = (1 - a) * q
    r = base
    for _ in range(cap):
        nxt = a * (mat @ r) + base
        step = np.max(np.abs(nxt - r)) if r.size else 0.0
        r = nxt
        if step <= threshold:
            return r
    raise ConvergenceError(f"personalized pagerank did not converge in {cap} iterations", step)


@lru_cache(maxsize=64)
def _heat_weights(t: float, tol: float) -> tuple[float, ...]:
    # grow the horizon until the Poisson tail drops below tol
    horizon = max(16, int(t + 10 * math.sqrt(t) + 10))
    while True:
        n = np.arange(horizon)
        tails = stats.poisson.sf(n, t)
        hit = np.flatnonzero(tails <= tol)
        if len(hit):
            return tuple(stats.poisson.pmf(np.arange(hit[0] + 1), t))
        horizon *= 2


def heat_kernel(W: NormalizedAdjacency, q, t: float, tol: float = 1e-9) -> np.ndarray:
    """Truncated series ``sum_n e^-t t^n / n! W^n q``; the omitted Poisson tail is at most ``tol``."""
    if t <= 0:
        raise ValueError("t must be positive")
    q = _as_signal(W, q)
    weights = _heat_weights(float(t), float(tol))
    term = q
    r = weights[0] * q
    for w in weights[1:]:
        term = W.matrix @ term
        r = r + w * term
    return r


def l1_normalize(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    norm = np.abs(r).sum(axis=0)
    if np.any(norm == 0):
        raise ValueError("cannot L1-normalize an all-zero signal")
    return r / norm


def sweep_ratio(r_personalized, r_uniform) -> np.ndarray:
    r_uniform = np.asarray(r_uniform, dtype=float)
    zero = np.flatnonzero(r_uniform == 0)
    if len(zero):
        raise ZeroDivisionError(
            f"non-personalized score is zero at node {zero[0]} (is the graph disconnected?)"
        )
    r_personalized = np.asarray(r_personalized, dtype=float)
    if r_personalized.ndim == 2 and r_uniform.ndim == 1:
        r_uniform = r_uniform[:, None]
    return r_personalized / r_uniform


def raw_filter(spec: FilterSpec, W: NormalizedAdjacency, q) -> np.ndarray:
    if spec.family == "ppr":
        return ppr(W, q, spec.parameter, spec.tolerance)
    return heat_kernel(W, q, spec.parameter, spec.tolerance)


def filter_matrix(spec: FilterSpec, W: NormalizedAdjacency) -> np.ndarray:
    """Dense ``H(W)`` built by running the filter on every unit prior.

    Worth it on small graphs when many priors go through the same filter.
    """
    return raw_filter(spec, W, np.eye(W.node_count))


def uniform_posterior(spec: FilterSpec, W: NormalizedAdjacency) -> np.ndarray:
    """L1-normalized filter output for the all-ones prior (the sweep denominator)."""
    return l1_normalize(raw_filter(spec, W, np.ones(W.node_count)))


def apply_filter(spec: FilterSpec, W: NormalizedAdjacency, q, uniform=None, matrix=None) -> np.ndarray:
    """Run the filter, L1-normalize, then divide by the uniform posterior for sweep specs.

    ``uniform`` reuses a precomputed :func:`uniform_posterior` and
    ``matrix`` a precomputed :func:`filter_matrix`.
    """
    raw = raw_filter(spec, W, q) if matrix is None else matrix @ _as_signal(W, q)
    r = l1_normalize(raw)
    if spec.sweep:
        if uniform is None:
            uniform = uniform_posterior(spec, W)
        r = sweep_ratio(r, uniform)
    return r


def filter_response(spec, lam) -> np.ndarray:
    """Spectral response ``H(lambda)``; ``spec`` is a FilterSpec or a sequence of hop weights."""
    lam = np.asarray(lam, dtype=float)
    if isinstance(spec, FilterSpec):
        if spec.family == "ppr":
            a = spec.parameter
            return (1 - a) / (1 - a * lam)
        return np.exp(-spec.parameter * (1 - lam))
    return np.polynomial.polynomial.polyval(lam, np.asarray(spec, dtype=float))


def positive_definite_check(spec, samples: int = LAMBDA_SAMPLES) -> bool:
    if samples < 2:
        raise ValueError("need at least two samples")
    return bool(np.min(filter_response(spec, np.linspace(-1, 1, samples))) > 0)


def strictness_bound(spec, p=None, samples: int = LAMBDA_SAMPLES) -> float:
    """Optimizer strictness a positive definite filter absorbs.

    Product of the min/max ratio of ``H`` over ``[-1, 1]`` and the min/max
    ratio of the post-processing vector ``p`` (uniform when omitted).
    """
    h = filter_response(spec, np.linspace(-1, 1, samples))
    if np.min(h) <= 0:
        raise ValueError("filter is not positive definite")
    ratio = float(np.min(h) / np.max(h))
    if p is not None:
        p = np.asarray(p, dtype=float)
        if np.any(p <= 0) or not np.all(np.isfinite(p)):
            raise ValueError("post-processing vector must be finite and positive")
        ratio *= float(p.min() / p.max())
    return ratio


def dense_filter_matrix(spec: FilterSpec, W: NormalizedAdjacency) -> np.ndarray:
    """Dense ``H(W)`` via eigendecomposition of a symmetric operator (small graphs only)."""
    dense = W.matrix.toarray()
    vals, vecs = np.linalg.eigh((dense + dense.T) / 2)
    return (vecs * filter_response(spec, vals)) @ vecs.T


def simulate_prior_flow(
    H: np.ndarray,
    p: Sequence[float],
    q0: Sequence[float],
    target: Sequence[float],
    strictness: float,
    steps: int = 1000,
    dt: float = 1e-2,
) -> np.ndarray:
    """Forward-Euler run of ``dq/dt = -grad + delta`` for ``0.5 * ||diag(p) H q - target||^2``.

    ``delta`` has norm ``strictness * ||grad||`` and points along
    ``H diag(p) grad``, the direction that most slows the loss decrease.
    Returns the loss after every step, starting with the initial loss.
    """
    H = np.asarray(H, dtype=float)
    p = np.asarray(p, dtype=float)
    q = np.array(q0, dtype=float)
    target = np.asarray(target, dtype=float)
    losses = np.empty(steps + 1)
    for k in range(steps + 1):
        residual = p * (H @ q) - target
        losses[k] = 0.5 * residual @ residual
        if k == steps:
            break
        grad = residual
        gnorm = np.linalg.norm(grad)
        if gnorm == 0:
            losses[k + 1:] = losses[k]
            break
        harm = H @ (p * grad)
        hnorm = np.linalg.norm(harm)
        delta = strictness * gnorm * harm / hnorm if hnorm > 0 else 0.0
        q = q + dt * (-grad + delta)
    return losses
