"""Experiment grid: datasets, seeded splits, per-cell evaluation and summaries."""

from __future__ import annotations

import csv
import hashlib
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml
from scipy.sparse.csgraph import connected_components

from . import baselines, editing
from .filters import FilterSpec, apply_filter, filter_matrix
from .graph import (
    Graph,
    load_edge_list,
    load_labels,
    load_node_set,
    normalize,
    remove_low_degree,
    select_communities,
)
from .metrics import ObjectiveSpec, SensitiveGroups, auc, prule_on_subset
from .optimizer import OptimizerSettings
from .stats import friedman, nemenyi

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "graph", "filter", "method", "fraction", "seed", "auc", "prule",
    "wall_time_s", "a_S", "a_Sp", "b_S", "b_Sp", "a0", "final_loss",
)
PARAM_COLUMNS = ("a_S", "a_Sp", "b_S", "b_Sp", "a0", "final_loss")

# method name -> (edit kind, objective) for prior editing approaches
EDIT_METHODS = {
    "FairPers": ("fairpers", ObjectiveSpec("mad", 1.0, 1.0)),
    "FairPers-C": ("fairpers", ObjectiveSpec("mad", 10.0, 0.8)),
    "FairEdit": ("fairedit", ObjectiveSpec("kl", 1.0, 1.0)),
    "FairEdit-C": ("fairedit", ObjectiveSpec("kl", 10.0, 0.8)),
    "FairEdit0": ("fairedit0", ObjectiveSpec("kl", 1.0, 1.0)),
    "FairEdit0-C": ("fairedit0", ObjectiveSpec("kl", 10.0, 0.8)),
}
METHODS = ("None", "Mult", "LFPRO", "FairWalk", *EDIT_METHODS)
BENCHMARK_METHODS = ("None", "Mult", "LFPRO", "FairWalk", "FairPers", "FairPers-C", "FairEdit", "FairEdit-C")
FRACTIONS = (0.1, 0.2, 0.3)


# --- datasets ---------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    fraction: float
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.fraction < 1:
            raise ValueError("split fraction must lie in (0, 1)")


def split(nodes, positives, spec: SplitSpec):
    """Seeded uniform train sample of ``floor(fraction * |nodes|)`` nodes.

    ``nodes`` is a node count or a collection of node indices. Returns the
    sorted train and test index arrays and the binary prior marking
    training positives.
    """
    universe = np.arange(nodes) if isinstance(nodes, (int, np.integer)) else np.unique(np.fromiter(nodes, dtype=np.int64))
    size = int(math.floor(spec.fraction * len(universe)))
    rng = np.random.default_rng(spec.seed)
    train = np.sort(rng.choice(universe, size=size, replace=False))
    test = np.setdiff1d(universe, train)
    n = int(universe.max()) + 1 if len(universe) else 0
    is_positive = np.zeros(n, dtype=bool)
    is_positive[list(positives)] = True
    prior = np.zeros(n)
    prior[train[is_positive[train]]] = 1.0
    if not prior.any():
        raise ValueError("training split holds no positive node; nothing to propagate")
    return train, test, prior


def generate_sbm(
    blocks: Sequence[int],
    p_in: float,
    p_out: float,
    sensitive_block=1,
    positive_block=0,
    seed: int = 0,
    connected: bool = True,
    max_attempts: int = 100,
):
    """Seeded stochastic block model.

    ``sensitive_block`` and ``positive_block`` may each be one block index
    or a list of them. When ``connected`` is set, disconnected draws are
    retried with the next seed. Returns ``(graph, groups, positives)``.
    """
    if len(blocks) < 2:
        raise ValueError("need at least two blocks")
    if not (0 <= p_in <= 1 and 0 <= p_out <= 1):
        raise ValueError("edge probabilities must lie in [0, 1]")
    membership = np.repeat(np.arange(len(blocks)), blocks)
    n = len(membership)
    probs = np.where(membership[:, None] == membership[None, :], p_in, p_out)
    for attempt in range(max_attempts):
        rng = np.random.default_rng(seed + attempt)
        draw = np.triu(rng.random((n, n)) < probs, k=1)
        edges = np.argwhere(draw)
        graph = Graph(n, edges)
        if not connected or connected_components(graph.adjacency, directed=False)[0] == 1:
            break
    else:
        raise RuntimeError(f"no connected SBM draw in {max_attempts} attempts from seed {seed}")
    pick = lambda spec: np.isin(membership, np.atleast_1d(spec))  # noqa: E731
    groups = SensitiveGroups(pick(sensitive_block))
    positives = set(np.flatnonzero(pick(positive_block)).tolist())
    return graph, groups, positives


# Desk-scale stand-ins for the real benchmark graphs.
SBM_FIXTURES = {
    "balanced": dict(blocks=[100, 100], p_in=0.1, p_out=0.01, sensitive_block=1, positive_block=0, seed=11),
    "skewed": dict(blocks=[110, 100, 40], p_in=0.08, p_out=0.01, sensitive_block=2, positive_block=0, seed=23),
    "overlap": dict(blocks=[80, 60, 100], p_in=0.09, p_out=0.01, sensitive_block=1, positive_block=[0, 1], seed=37),
}


@dataclass
class Dataset:
    name: str
    graph: Graph
    groups: SensitiveGroups
    positives: set

    @cached_property
    def labels(self) -> np.ndarray:
        out = np.zeros(self.graph.node_count, dtype=bool)
        out[list(self.positives)] = True
        return out

    @cached_property
    def adjacency(self):
        return normalize(self.graph, "symmetric")

    @cached_property
    def fairwalk(self):
        return baselines.fairwalk_normalize(self.graph, self.groups)

    @cached_property
    def _matrices(self) -> dict:
        return {}

    def filter_matrix(self, spec: FilterSpec):
        """Cached dense filter for small graphs; None when the graph is too large."""
        if self.graph.node_count > editing.DENSE_LIMIT:
            return None
        if spec not in self._matrices:
            self._matrices[spec] = filter_matrix(spec, self.adjacency)
        return self._matrices[spec]


def load_dataset(entry: dict, base: Path = Path(".")) -> Dataset:
    """Build a dataset from one ``graphs`` config entry."""
    name = entry["name"]
    if "sbm" in entry:
        params = entry["sbm"]
        params = dict(SBM_FIXTURES[params]) if isinstance(params, str) else dict(params)
        graph, groups, positives = generate_sbm(**params)
        return Dataset(name, graph, groups, positives)
    graph = load_edge_list(base / entry["edges"])
    if entry.get("min_degree"):
        graph, _ = remove_low_degree(graph, int(entry["min_degree"]))
    table = load_labels(base / entry["labels"], graph)
    explicit = load_node_set(base / entry["sensitive"], graph) if entry.get("sensitive") else None
    positives, sensitive = select_communities(table, int(entry.get("min_size", 100)), explicit)
    return Dataset(name, graph, SensitiveGroups.from_nodes(graph.node_count, sensitive), positives)


# --- configuration ----------------------------------------------------------

@dataclass
class GridConfig:
    graphs: list = field(default_factory=list)
    filters: list = field(default_factory=lambda: list(("PPR.85", "PPR.99", "HK3", "HK7", "PPR.85S", "PPR.99S", "HK3S", "HK7S")))
    methods: list = field(default_factory=lambda: list(BENCHMARK_METHODS))
    fractions: list = field(default_factory=lambda: list(FRACTIONS))
    seed: int = 0
    tolerance: float = 1e-9
    optimizer: dict = field(default_factory=dict)
    record_wall_time: bool = True
    base_dir: str = "."

    @classmethod
    def from_dict(cls, data: dict, base_dir=".") -> "GridConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        unknown = set(data) - set(known)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        known.setdefault("base_dir", str(base_dir))
        cfg = cls(**known)
        for m in cfg.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        for f in cfg.filters:
            FilterSpec.parse(f)
        return cfg

    @classmethod
    def load(cls, path) -> "GridConfig":
        path = Path(path)
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        return cls.from_dict(data, base_dir=path.parent)

    def optimizer_settings(self) -> OptimizerSettings:
        return OptimizerSettings(**self.optimizer)

    def registry(self) -> dict[str, Dataset]:
        return {e["name"]: load_dataset(e, Path(self.base_dir)) for e in self.graphs}


def default_suite(**overrides) -> GridConfig:
    """The synthetic benchmark: every SBM fixture under the full filter and method grid."""
    cfg = GridConfig(graphs=[{"name": f"sbm_{k}", "sbm": k} for k in SBM_FIXTURES])
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


# --- cells ------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentCell:
    graph: str
    filter: str
    method: str
    fraction: float
    seed: int


@dataclass
class CellResult:
    cell: ExperimentCell
    auc: float
    prule: float
    wall_time: float = 0.0
    params: dict | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def cell_seed(global_seed: int, graph: str, fraction_index: int) -> int:
    digest = hashlib.sha256(f"{global_seed}|{graph}|{fraction_index}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def method_posterior(method, spec: FilterSpec, data: Dataset, prior, settings=None):
    """Posterior of one approach. Receives only the training prior, never the test split."""
    if method == "FairWalk":
        return apply_filter(spec, data.fairwalk, prior), None
    if method in EDIT_METHODS:
        kind, obj = EDIT_METHODS[method]
        tuned = editing.tune(
            kind, spec, data.adjacency, prior, data.groups, obj, settings, matrix=data.filter_matrix(spec)
        )
        return tuned.posterior, tuned.record()
    r = apply_filter(spec, data.adjacency, prior)
    if method == "None":
        return r, None
    if method == "Mult":
        return baselines.mult(r, data.groups), None
    if method == "LFPRO":
        return baselines.lfpro(r, data.groups), None
    raise ValueError(f"unknown method {method!r}")


def run_cell(cell: ExperimentCell, registry: dict, tolerance=1e-9, settings=None) -> CellResult:
    start = time.perf_counter()
    try:
        data = registry[cell.graph]
        spec = FilterSpec.parse(cell.filter, tolerance)
        _, test, prior = split(data.graph.node_count, data.positives, SplitSpec(cell.fraction, cell.seed))
        posterior, params = method_posterior(cell.method, spec, data, prior, settings)
        result = CellResult(
            cell,
            auc(posterior, data.labels, test),
            float(prule_on_subset(posterior, data.groups, test)),
            params=params,
        )
    except Exception as exc:  # recorded, the grid carries on
        log.warning("cell %s failed: %s", cell, exc)
        result = CellResult(cell, math.nan, math.nan, error=f"{type(exc).__name__}: {exc}")
    result.wall_time = time.perf_counter() - start
    return result


def grid_cells(config: GridConfig) -> list[ExperimentCell]:
    cells = []
    for entry in config.graphs:
        for f in config.filters:
            for m in config.methods:
                for i, frac in enumerate(config.fractions):
                    cells.append(ExperimentCell(entry["name"], f, m, float(frac), cell_seed(config.seed, entry["name"], i)))
    return cells


_WORKER: dict = {}


def _init_worker(config: GridConfig):
    _WORKER["registry"] = config.registry()
    _WORKER["config"] = config


def _run_in_worker(cell):
    cfg = _WORKER["config"]
    return run_cell(cell, _WORKER["registry"], cfg.tolerance, cfg.optimizer_settings())


def run_grid(config: GridConfig, workers: int = 1) -> list[CellResult]:
    """Evaluate every graph x filter x method x fraction cell, in canonical order."""
    cells = grid_cells(config)
    if not cells:
        log.warning("empty experiment grid")
        return []
    if workers <= 1:
        _init_worker(config)
        results = [_run_in_worker(c) for c in cells]
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(config,)) as pool:
            results = list(pool.map(_run_in_worker, cells, chunksize=1))
    order = {c: i for i, c in enumerate(cells)}
    results.sort(key=lambda r: order[r.cell])
    if not config.record_wall_time:
        for r in results:
            r.wall_time = math.nan
    return results


# --- persistence ------------------------------------------------------------

def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return repr(float(x))


def write_results_csv(results: Sequence[CellResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in results:
            c = r.cell
            params = r.params or {}
            writer.writerow([
                c.graph, c.filter, c.method, _fmt(c.fraction), c.seed, _fmt(r.auc), _fmt(r.prule),
                _fmt(r.wall_time), *(_fmt(params.get(k)) for k in PARAM_COLUMNS),
            ])


def read_results_csv(path) -> list[CellResult]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected results header {reader.fieldnames}")
        for row in reader:
            cell = ExperimentCell(row["graph"], row["filter"], row["method"], float(row["fraction"]), int(row["seed"]))
            params = {k: float(row[k]) for k in PARAM_COLUMNS}
            has_params = not all(math.isnan(v) for v in params.values())
            out.append(CellResult(
                cell, float(row["auc"]), float(row["prule"]), float(row["wall_time_s"]),
                params if has_params else None,
            ))
    return out


# --- summaries --------------------------------------------------------------

@dataclass
class AveragedRow:
    graph: str
    filter: str
    method: str
    auc: float
    prule: float


def average_over_fractions(results: Sequence[CellResult]) -> list[AveragedRow]:
    """Mean AUC and pRule per (graph, filter, method), first-seen order."""
    buckets: dict[tuple, list[CellResult]] = {}
    for r in results:
        buckets.setdefault((r.cell.graph, r.cell.filter, r.cell.method), []).append(r)
    rows = []
    for (g, f, m), rs in buckets.items():
        rows.append(AveragedRow(g, f, m, float(np.mean([r.auc for r in rs])), float(np.mean([r.prule for r in rs]))))
    return rows


@dataclass
class Summary:
    """Table-4 style comparison of approaches for one post-processing group."""

    group: str
    methods: list
    settings: int
    mean_auc: dict
    mean_prule: dict
    frac_fair: dict
    auc_ranks: dict | None = None
    prule_ranks: dict | None = None
    auc_friedman: object = None
    prule_friedman: object = None
    critical_difference: float | None = None


def _uses_sweep(filter_name: str) -> bool:
    return FilterSpec.parse(filter_name).sweep


def summarize(results: Sequence[CellResult], group: str = "none", threshold: float = 0.8) -> Summary:
    """Average measures per approach over every (graph, filter) setting in ``group``.

    ``group`` is ``none`` (filters without post-processing), ``sweep``, or
    ``all``. Rank statistics use only settings where every approach
    produced a value.
    """
    if not results:
        raise ValueError("no results to summarize")
    rows = [
        r for r in average_over_fractions(results)
        if group == "all" or _uses_sweep(r.filter) == (group == "sweep")
    ]
    methods = list(dict.fromkeys(r.method for r in rows))
    settings = list(dict.fromkeys((r.graph, r.filter) for r in rows))
    index = {(r.graph, r.filter, r.method): r for r in rows}
    auc_m = np.full((len(settings), len(methods)), np.nan)
    prule_m = np.full_like(auc_m, np.nan)
    for i, s in enumerate(settings):
        for j, m in enumerate(methods):
            row = index.get((*s, m))
            if row is not None:
                auc_m[i, j], prule_m[i, j] = row.auc, row.prule

    def col_stats(mat, fn):
        return {m: float(fn(mat[:, j][~np.isnan(mat[:, j])])) for j, m in enumerate(methods)}

    summary = Summary(
        group, methods, len(settings),
        col_stats(auc_m, np.mean), col_stats(prule_m, np.mean),
        col_stats(prule_m, lambda v: np.mean(v >= threshold)),
    )
    complete = ~np.isnan(auc_m).any(axis=1) & ~np.isnan(prule_m).any(axis=1)
    if not complete.all():
        log.warning("excluding %d settings with failed cells from rank statistics", int((~complete).sum()))
    n = int(complete.sum())
    if len(methods) >= 2 and n >= 1:
        a, p = auc_m[complete], prule_m[complete]
        if len(methods) <= 10:
            na, np_ = nemenyi(a), nemenyi(p)
            summary.auc_ranks = dict(zip(methods, map(float, na.avg_ranks)))
            summary.prule_ranks = dict(zip(methods, map(float, np_.avg_ranks)))
            summary.critical_difference = na.critical_difference
        if len(methods) >= 3 and n >= 2:
            summary.auc_friedman = friedman(a)
            summary.prule_friedman = friedman(p)
    return summary


def format_summary(summary: Summary) -> str:
    title = {"none": "No post-processing", "sweep": "Sweep ratio", "all": "All filters"}[summary.group]
    lines = [f"{title} ({summary.settings} settings)", f"{'method':<12} {'AUC':>12} {'pRule':>12} {'pRule>=80%':>11}"]
    for m in summary.methods:
        auc_s = f"{summary.mean_auc[m]:.2f}"
        prule_s = f"{summary.mean_prule[m]:.2f}"
        if summary.auc_ranks:
            auc_s += f" ({summary.auc_ranks[m]:.1f})"
            prule_s += f" ({summary.prule_ranks[m]:.1f})"
        lines.append(f"{m:<12} {auc_s:>12} {prule_s:>12} {summary.frac_fair[m]:>11.2f}")
    if summary.critical_difference is not None:
        lines.append(f"Nemenyi critical difference (alpha=0.05): {summary.critical_difference:.3f}")
    for label, fr in (("AUC", summary.auc_friedman), ("pRule", summary.prule_friedman)):
        if fr is not None:
            verdict = "reject" if fr.reject else "keep"
            lines.append(f"Friedman {label}: chi2={fr.statistic:.2f} p={fr.pvalue:.2e} ({verdict} at {fr.alpha})")
    return "\n".join(lines)


def summary_rows(summary: Summary) -> list[dict]:
    out = []
    for m in summary.methods:
        out.append({
            "group": summary.group,
            "method": m,
            "auc": summary.mean_auc[m],
            "auc_rank": (summary.auc_ranks or {}).get(m, math.nan),
            "prule": summary.mean_prule[m],
            "prule_rank": (summary.prule_ranks or {}).get(m, math.nan),
            "frac_prule_80": summary.frac_fair[m],
        })
    return out
