import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairprior.graph import (
    CommunityTable,
    Graph,
    GraphFormatError,
    load_edge_list,
    load_labels,
    normalize,
    propagate,
    remove_low_degree,
    select_communities,
)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def path_graph(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


K3 = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


edge_lists = st.integers(2, 12).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=40),
    )
)


class TestLoading:
    def test_two_edges(self, tmp_path):
        g = load_edge_list(write(tmp_path, "e.txt", "0 1\n1 2"))
        assert (g.node_count, g.edge_count) == (3, 2)

    def test_undirected_dedup(self, tmp_path):
        g = load_edge_list(write(tmp_path, "e.txt", "a b\nb a"))
        assert (g.node_count, g.edge_count) == (2, 1)

    def test_malformed_line_reports_line_number(self, tmp_path):
        with pytest.raises(GraphFormatError, match=":2:"):
            load_edge_list(write(tmp_path, "e.txt", "0 1\nx"))

    def test_empty_file_rejected(self, tmp_path):
        with pytest.raises(GraphFormatError):
            load_edge_list(write(tmp_path, "e.txt", "# nothing here\n"))

    def test_first_seen_order_and_comments(self, tmp_path):
        g = load_edge_list(write(tmp_path, "e.txt", "# header\nz y\ny x\n"))
        assert g.node_ids == {"z": 0, "y": 1, "x": 2}
        assert g.labels == ["z", "y", "x"]

    def test_labels(self, tmp_path):
        table = load_labels(write(tmp_path, "l.txt", "0 g1\n1 g1\n2 g2"), path_graph(3))
        assert table.groups == {"g1": {0, 1}, "g2": {2}}

    def test_empty_labels(self, tmp_path):
        assert len(load_labels(write(tmp_path, "l.txt", ""), path_graph(3))) == 0

    def test_unknown_label_node(self, tmp_path):
        with pytest.raises(KeyError, match="'9'"):
            load_labels(write(tmp_path, "l.txt", "9 g1"), path_graph(3))


class TestCommunities:
    @staticmethod
    def table(sizes):
        groups, start = {}, 0
        for i, size in enumerate(sizes):
            groups[f"g{i + 1}"] = set(range(start, start + size))
            start += size
        return CommunityTable(groups)

    def test_first_and_second_large_groups(self):
        pos, sens = select_communities(self.table([50, 150, 200]), 100)
        assert len(pos) == 150 and len(sens) == 200

    def test_explicit_sensitive_overrides(self):
        pos, sens = select_communities(self.table([150]), 100, sensitive={1, 2})
        assert len(pos) == 150 and sens == {1, 2}

    def test_too_few_groups(self):
        with pytest.raises(ValueError):
            select_communities(self.table([10, 20]), 100)

    def test_size_must_exceed_threshold(self):
        with pytest.raises(ValueError):
            select_communities(self.table([100, 101]), 100)


class TestRemoveLowDegree:
    def test_path_single_pass(self):
        g, kept = remove_low_degree(path_graph(3), 2)
        assert (g.node_count, g.edge_count) == (1, 0)
        assert kept.tolist() == [1]

    def test_triangle_unchanged(self):
        g, kept = remove_low_degree(K3, 2)
        assert g.node_count == 3 and g.edge_count == 3 and kept.tolist() == [0, 1, 2]

    def test_star(self):
        star = Graph.from_edges(5, [(0, i) for i in range(1, 5)])
        g, kept = remove_low_degree(star, 2)
        assert g.node_count == 1 and kept.tolist() == [0]

    def test_single_pass_not_iterative(self):
        # 0-1-2-3 path: single pass keeps 1 and 2 even though 1-2 alone have degree 1 afterwards
        g, _ = remove_low_degree(path_graph(4), 2)
        assert g.node_count == 2 and g.edge_count == 1

    def test_ids_remapped(self):
        g, _ = remove_low_degree(path_graph(3), 2)
        assert g.node_ids == {"1": 0}

    def test_empty_result(self):
        with pytest.raises(ValueError):
            remove_low_degree(Graph.from_edges(2, [(0, 1)]), 2)


class TestNormalize:
    def test_single_edge_symmetric(self):
        W = normalize(Graph.from_edges(2, [(0, 1)]), "symmetric")
        np.testing.assert_array_equal(W.matrix.toarray(), [[0, 1], [1, 0]])

    def test_triangle_symmetric(self):
        W = normalize(K3, "symmetric").matrix.toarray()
        np.testing.assert_allclose(W, (np.ones((3, 3)) - np.eye(3)) / 2)

    def test_path_column(self):
        W = normalize(path_graph(3), "column").matrix.toarray()
        np.testing.assert_allclose(W, [[0, 0.5, 0], [1, 0, 1], [0, 0.5, 0]])

    def test_zero_degree_rows_are_zero(self):
        g = Graph.from_edges(3, [(0, 1)])
        for kind in ("symmetric", "column"):
            W = normalize(g, kind).matrix.toarray()
            assert not W[2].any() and not W[:, 2].any()

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            normalize(K3, "row")

    def test_regular_graph_fixes_ones(self):
        cycle = Graph.from_edges(6, [(i, (i + 1) % 6) for i in range(6)])
        W = normalize(cycle, "symmetric")
        np.testing.assert_array_equal(propagate(W, np.ones(6)), np.ones(6))


class TestPropagate:
    def test_permutation(self):
        W = normalize(Graph.from_edges(2, [(0, 1)]), "symmetric")
        np.testing.assert_array_equal(propagate(W, [1, 0]), [0, 1])

    def test_zero(self):
        np.testing.assert_array_equal(propagate(normalize(K3), np.zeros(3)), np.zeros(3))

    def test_triangle(self):
        np.testing.assert_allclose(propagate(normalize(K3), [1, 0, 0]), [0, 0.5, 0.5])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            propagate(normalize(K3), [1, 0])


@settings(max_examples=60, deadline=None)
@given(edge_lists)
def test_graph_invariants(data):
    n, edges = data
    g = Graph.from_edges(n, edges)
    e = g.edges
    if len(e):
        assert (e[:, 0] < e[:, 1]).all() and e.max() < n
    assert len({tuple(x) for x in e.tolist()}) == g.edge_count
    assert g.degrees.sum() == 2 * g.edge_count


@settings(max_examples=60, deadline=None)
@given(edge_lists, st.integers(0, 2**32 - 1))
def test_propagation_properties(data, seed):
    n, edges = data
    g = Graph.from_edges(n, edges)
    rng = np.random.default_rng(seed)
    x, y = rng.random(n), rng.random(n)
    alpha, beta = rng.normal(size=2)
    S = normalize(g, "symmetric")
    np.testing.assert_allclose(S.matrix.toarray(), S.matrix.toarray().T)
    np.testing.assert_allclose(
        propagate(S, alpha * x + beta * y), alpha * propagate(S, x) + beta * propagate(S, y), atol=1e-12
    )
    assert abs(propagate(S, x) @ y - x @ propagate(S, y)) <= 1e-12
    eig = np.linalg.eigvalsh(S.matrix.toarray())
    assert eig.min() >= -1 - 1e-12 and eig.max() <= 1 + 1e-12
    C = normalize(g, "column")
    sums = np.asarray(C.matrix.sum(axis=0)).ravel()
    positive = g.degrees > 0
    np.testing.assert_allclose(sums[positive], 1, atol=1e-12)
    x = x * positive
    assert abs(propagate(C, x).sum() - x.sum()) <= 1e-12
