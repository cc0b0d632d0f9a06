"""Fairness-aware prior editing and the loop that tunes it.

Edited priors are parametric transforms of the original prior ``q``, the
base posterior ``r`` and group membership. Parameters are searched with
:mod:`fairprior.optimizer` so that the filtered edited priors minimize a
fairness-aware objective.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .filters import FilterSpec, apply_filter, filter_matrix, uniform_posterior
from .graph import NormalizedAdjacency
from .metrics import ObjectiveSpec, SensitiveGroups, objective
from .optimizer import OptimizerSettings, minimize

KINDS = ("fairpers", "fairedit", "fairedit0")

# a_S, a_S', b_S, b_S', a0
LOWER = np.array([0.0, 0.0, -10.0, -10.0, 0.0])
UPPER = np.array([1.0, 1.0, 10.0, 10.0, 1.0])

DENSE_LIMIT = 2000


@dataclass(frozen=True)
class EditParams:
    a_S: float = 0.5
    a_Sp: float = 0.5
    b_S: float = 0.0
    b_Sp: float = 0.0
    a0: float = 0.0

    def __post_init__(self):
        values = np.array(self.as_vector())
        if np.any(values < LOWER) or np.any(values > UPPER):
            raise ValueError(f"edit parameters outside their box: {self}")

    def as_vector(self) -> tuple[float, ...]:
        return (self.a_S, self.a_Sp, self.b_S, self.b_Sp, self.a0)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EditMechanism:
    kind: str
    params: EditParams = EditParams()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown edit mechanism {self.kind!r}")
        if self.kind == "fairedit0" and self.params.a0 != 0:
            raise ValueError("fairedit0 fixes a0 = 0")


def parameter_count(kind: str) -> int:
    return 5 if kind == "fairedit" else 4


def _params_from_vector(kind: str, theta) -> EditParams:
    theta = [float(v) for v in theta]
    if kind != "fairedit":
        theta = theta[:4] + [0.0]
    return EditParams(*theta)


def _edit_columns(kind, thetas, q, r, mask):
    """Edited priors for every row of ``thetas``, one column each."""
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    top = r.max()
    if top <= 0:
        raise ValueError("base posterior needs a positive maximum")
    x = r / top - q
    if kind != "fairpers":
        x = np.abs(x)
    thetas = np.atleast_2d(thetas)
    a = np.where(mask[:, None], thetas[:, 0], thetas[:, 1])
    b = np.where(mask[:, None], thetas[:, 2], thetas[:, 3])
    bx = b * x[:, None]
    out = a * np.exp(-bx) + (1 - a) * np.exp(bx)
    if kind == "fairedit":
        out = out + thetas[:, 4] * q[:, None]
    return out


def edit_priors(mech: EditMechanism, q, r, groups: SensitiveGroups) -> np.ndarray:
    """Apply the mechanism's editing rule to prior ``q`` given base posterior ``r``."""
    theta = np.array(mech.params.as_vector())
    return _edit_columns(mech.kind, theta, q, r, groups.mask)[:, 0]


@dataclass
class TuneResult:
    params: EditParams
    posterior: np.ndarray
    loss: float
    evaluations: int
    trace: list

    def record(self) -> dict:
        return {**self.params.as_dict(), "final_loss": self.loss}


def tune(
    kind: str,
    spec: FilterSpec,
    W: NormalizedAdjacency,
    q,
    groups: SensitiveGroups,
    objective_spec: ObjectiveSpec,
    settings: OptimizerSettings | None = None,
    base_posterior=None,
    matrix=None,
) -> TuneResult:
    """Search edit parameters so the filtered edited prior minimizes the objective.

    Only the prior, the graph and group membership are consulted; nothing
    about held-out nodes reaches this function. ``matrix`` is an optional
    precomputed :func:`~fairprior.filters.filter_matrix` (or ``"auto"`` to
    build one on graphs of at most ``DENSE_LIMIT`` nodes).
    """
    if isinstance(matrix, str):
        matrix = filter_matrix(spec, W) if W.node_count <= DENSE_LIMIT else None
    if kind not in KINDS:
        raise ValueError(f"unknown edit mechanism {kind!r}")
    uniform = uniform_posterior(spec, W) if spec.sweep else None
    r = apply_filter(spec, W, q, uniform, matrix) if base_posterior is None else np.asarray(base_posterior)
    K = parameter_count(kind)

    def loss(thetas):
        priors = _edit_columns(kind, thetas, q, r, groups.mask)
        posteriors = apply_filter(spec, W, priors, uniform, matrix)
        return objective(objective_spec, posteriors, r, groups)

    found = minimize(loss, LOWER[:K], UPPER[:K], settings, vectorized=True)
    params = _params_from_vector(kind, found.x)
    prior = edit_priors(EditMechanism(kind, params), q, r, groups)
    return TuneResult(params, apply_filter(spec, W, prior, uniform, matrix), found.fun, found.evaluations, found.trace)
