import numpy as np
import pytest
from scipy.sparse.csgraph import connected_components

from fairprior.graph import Graph

ACCEPTANCE_LINES: list[str] = []


def random_connected_graph(rng, n, p=0.3):
    """Erdos-Renyi draw plus a random spanning path, so it is always connected."""
    upper = np.triu(rng.random((n, n)) < p, k=1)
    edges = [tuple(e) for e in np.argwhere(upper)]
    order = rng.permutation(n)
    edges += [(int(order[i]), int(order[i + 1])) for i in range(n - 1)]
    graph = Graph.from_edges(n, edges)
    assert connected_components(graph.adjacency, directed=False)[0] == 1
    return graph


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def acceptance():
    """Record a PASS/FAIL line for the terminal summary, then assert."""

    def record(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else "")
        print(line)
        ACCEPTANCE_LINES.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
