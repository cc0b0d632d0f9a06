"""Undirected graphs, community tables and adjacency normalization."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp


class GraphFormatError(ValueError):
    """Raised when an edge-list or label file cannot be parsed."""


@dataclass(frozen=True)
class Graph:
    """Immutable unweighted undirected graph over dense node indices.

    ``edges`` holds each unordered pair once as ``(u, v)`` with ``u < v``.
    ``node_ids`` maps external identifiers to dense indices; ``labels`` is
    the inverse, ordered by index.
    """

    node_count: int
    edges: np.ndarray
    node_ids: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.node_count < 1:
            raise ValueError("graph must have at least one node")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(edges):
            if edges.min() < 0 or edges.max() >= self.node_count:
                raise ValueError("edge endpoint out of range")
            lo = np.minimum(edges[:, 0], edges[:, 1])
            hi = np.maximum(edges[:, 0], edges[:, 1])
            keep = lo != hi
            edges = np.unique(np.stack([lo[keep], hi[keep]], axis=1), axis=0)
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        if not self.node_ids:
            object.__setattr__(self, "node_ids", {str(i): i for i in range(self.node_count)})

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        return cls(node_count, np.array(list(edges), dtype=np.int64).reshape(-1, 2))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def labels(self) -> list[str]:
        out = [""] * self.node_count
        for name, idx in self.node_ids.items():
            out[idx] = name
        return out

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        n = self.node_count
        u, v = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        data = np.ones(len(rows))
        return sp.csr_matrix((data, (rows, cols)), shape=(n, n))

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.node_count)

    def neighbors(self, node: int) -> np.ndarray:
        adj = self.adjacency
        return adj.indices[adj.indptr[node]:adj.indptr[node + 1]]


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Sparse propagation operator ``W``; ``kind`` is symmetric or column."""

    kind: str
    matrix: sp.csr_matrix

    @property
    def node_count(self) -> int:
        return self.matrix.shape[0]


@dataclass
class CommunityTable:
    """Ordered mapping of group id to member node indices (groups may overlap)."""

    groups: dict[str, set[int]] = field(default_factory=dict)

    def __len__(self):
        return len(self.groups)


def _tokens(path: Path):
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line.split()


def load_edge_list(path) -> Graph:
    """Read a whitespace-separated edge list; ids get indices in first-seen order."""
    ids: dict[str, int] = {}
    pairs = []
    for lineno, parts in _tokens(path):
        if len(parts) != 2:
            raise GraphFormatError(f"{path}:{lineno}: expected two node ids, got {len(parts)} tokens")
        u, v = (ids.setdefault(p, len(ids)) for p in parts)
        pairs.append((u, v))
    if not ids:
        raise GraphFormatError(f"{path}: no edges found")
    return Graph(len(ids), np.array(pairs, dtype=np.int64).reshape(-1, 2), ids)


def load_labels(path, graph: Graph) -> CommunityTable:
    table = CommunityTable()
    for lineno, parts in _tokens(path):
        if len(parts) != 2:
            raise GraphFormatError(f"{path}:{lineno}: expected '<node> <group>'")
        node, group = parts
        if node not in graph.node_ids:
            raise KeyError(f"unknown node id {node!r} at {path}:{lineno}")
        table.groups.setdefault(group, set()).add(graph.node_ids[node])
    return table


def load_node_set(path, graph: Graph) -> set[int]:
    """Read one node id per line (extra columns ignored)."""
    nodes = set()
    for lineno, parts in _tokens(path):
        if parts[0] not in graph.node_ids:
            raise KeyError(f"unknown node id {parts[0]!r} at {path}:{lineno}")
        nodes.add(graph.node_ids[parts[0]])
    return nodes


def select_communities(table: CommunityTable, min_size: int = 100, sensitive=None):
    """Pick the first group larger than ``min_size`` as positives.

    The sensitive set is the second such group unless ``sensitive`` is given.
    """
    qualifying = [nodes for nodes in table.groups.values() if len(nodes) > min_size]
    needed = 1 if sensitive is not None else 2
    if len(qualifying) < needed:
        raise ValueError(
            f"need {needed} communities with more than {min_size} members, found {len(qualifying)}"
        )
    positive = set(qualifying[0])
    return positive, set(sensitive) if sensitive is not None else set(qualifying[1])


def remove_low_degree(graph: Graph, min_degree: int = 2) -> tuple[Graph, np.ndarray]:
    """Drop, in a single pass, nodes whose degree is below ``min_degree``.

    Returns the induced subgraph and ``kept`` where ``kept[new] = old``.
    """
    if min_degree < 0:
        raise ValueError("min_degree must be non-negative")
    kept = np.flatnonzero(graph.degrees >= min_degree)
    if len(kept) == 0:
        raise ValueError("no nodes survive degree filtering")
    remap = np.full(graph.node_count, -1, dtype=np.int64)
    remap[kept] = np.arange(len(kept))
    e = remap[graph.edges]
    e = e[(e >= 0).all(axis=1)]
    ids = {name: int(remap[idx]) for name, idx in graph.node_ids.items() if remap[idx] >= 0}
    return Graph(len(kept), e, ids), kept


def _safe_inverse(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=float)
    np.divide(1.0, x, out=out, where=x > 0)
    return out


def normalize(graph: Graph, kind: str = "symmetric") -> NormalizedAdjacency:
    """Symmetric ``D^-1/2 A D^-1/2`` or column ``A D^-1``; zero degrees map to zero."""
    adj = graph.adjacency
    deg = graph.degrees.astype(float)
    if kind == "symmetric":
        # one square root per entry keeps regular graphs exact
        coo = adj.tocoo()
        weights = 1.0 / np.sqrt(deg[coo.row] * deg[coo.col])
        mat = sp.csr_matrix((weights, (coo.row, coo.col)), shape=adj.shape)
    elif kind == "column":
        mat = adj @ sp.diags(_safe_inverse(deg))
    else:
        raise ValueError(f"unknown normalization {kind!r}")
    return NormalizedAdjacency(kind, sp.csr_matrix(mat))


def propagate(W: NormalizedAdjacency, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape[0] != W.node_count:
        raise ValueError(f"signal length {q.shape[0]} does not match {W.node_count} nodes")
    return W.matrix @ q
