import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from incnet.graph import (
    AttributedGraph,
    GraphFormatError,
    load_attrs,
    load_edges,
    load_labels,
    save_attrs,
    save_edges,
)


def adjacency_by_name(graph):
    names = graph.node_vocab
    return {
        names.name(i): {
            names.name(j): w
            for j, w in zip(graph.neighbors(i), graph.neighbor_weights(i))
        }
        for i in range(graph.node_count)
    }


class TestLoadEdges:
    def test_path(self, write):
        g = load_edges(write("a b\nb c\n"))
        assert g.node_count == 3
        assert g.node_vocab.names == ("a", "b", "c")
        b = g.node_vocab.id("b")
        assert sorted(g.node_vocab.name(j) for j in g.neighbors(b)) == ["a", "c"]

    def test_duplicates_in_both_directions_are_summed(self, write):
        g = load_edges(write("a b\nb a\n"))
        assert g.edge_count == 1
        np.testing.assert_array_equal(g.neighbor_weights(0), [2.0])
        np.testing.assert_array_equal(g.neighbor_weights(1), [2.0])

    def test_empty_file(self, write):
        g = load_edges(write(""))
        assert g.node_count == 0
        assert g.edge_count == 0

    def test_comments_weights_and_whitespace(self, write):
        g = load_edges(write("# header\na\tb  2.5 # trailing\n\n  c b\n"))
        assert g.edge_count == 2
        assert adjacency_by_name(g)["b"] == {"a": 2.5, "c": 1.0}

    def test_self_loop_dropped(self, write):
        g = load_edges(write("a a\na b\n"))
        assert g.edge_count == 1
        assert not g.has_edge(0, 0)

    def test_single_token_declares_isolated_node(self, write):
        g = load_edges(write("a b\nz\n"))
        assert g.node_count == 3
        assert g.degree(g.node_vocab.id("z")) == 0

    def test_malformed_line_reports_line_number(self, write):
        with pytest.raises(GraphFormatError, match=":2:"):
            load_edges(write("a b\na b c d\n"))

    def test_non_numeric_weight(self, write):
        with pytest.raises(GraphFormatError, match=":1:"):
            load_edges(write("a b heavy\n"))

    def test_negative_weight(self, write):
        with pytest.raises(GraphFormatError, match="negative"):
            load_edges(write("a b -1\n"))


class TestLoadAttrs:
    def test_single_entry(self, write):
        g = load_attrs(load_edges(write("a b\n")), write("a w1 2\n"))
        assert g.attr_count == 1
        cols, vals = g.attr_row(g.node_vocab.id("a"))
        assert [g.attr_vocab.name(c) for c in cols] == ["w1"]
        np.testing.assert_array_equal(vals, [2.0])

    def test_observed_zero(self, write):
        g = load_attrs(load_edges(write("a b\n")), write("a w1 0\n"))
        assert g.observed(0, 0) == 1
        assert g.attr_value(0, 0) == 0.0
        assert g.observed(1, 0) == 0

    def test_unknown_node(self, write):
        graph = load_edges(write("a b\n"))
        with pytest.raises(GraphFormatError, match="unknown node 'zz'"):
            load_attrs(graph, write("zz w1 1\n"))

    def test_negative_value(self, write):
        graph = load_edges(write("a b\n"))
        with pytest.raises(GraphFormatError, match="negative"):
            load_attrs(graph, write("a w1 -2\n"))

    def test_duplicate_keeps_last_with_warning(self, write):
        graph = load_edges(write("a b\n"))
        with pytest.warns(UserWarning, match="duplicate"):
            g = load_attrs(graph, write("a w1 1\na w1 3\n"))
        assert g.attr_value(0, 0) == 3.0
        assert g.observed_count == 1

    def test_attribute_vocab_in_first_seen_order(self, write):
        g = load_attrs(load_edges(write("a b\n")), write("b z 1\na y 1\nb y 1\n"))
        assert g.attr_vocab.names == ("z", "y")

    def test_structure_untouched(self, write):
        graph = load_edges(write("a b\nb c\n"))
        g = load_attrs(graph, write("a w 1\n"))
        assert g.indices is graph.indices
        assert g.weights is graph.weights


class TestLoadLabels:
    def test_two_classes(self, write):
        graph = load_edges(write("a b\nb c\n"))
        labels = load_labels(graph, write("a c1\nb c2\n"))
        assert labels.n_classes == 2
        assert labels[0] == 0 and labels[1] == 1

    def test_unlisted_node_unlabeled(self, write):
        graph = load_edges(write("a b\nb c\n"))
        labels = load_labels(graph, write("a c1\nb c2\n"))
        assert labels[graph.node_vocab.id("c")] is None

    def test_duplicate_label(self, write):
        graph = load_edges(write("a b\n"))
        with pytest.raises(GraphFormatError, match="duplicate label"):
            load_labels(graph, write("a c1\na c2\n"))

    def test_unknown_node(self, write):
        graph = load_edges(write("a b\n"))
        with pytest.raises(GraphFormatError, match="unknown node"):
            load_labels(graph, write("q c1\n"))


edge_lists = st.lists(
    st.tuples(st.integers(0, 14), st.integers(0, 14), st.integers(1, 5)), max_size=60
)


@settings(max_examples=100, deadline=None)
@given(edge_lists)
def test_invariants_on_random_graphs(edges):
    g = AttributedGraph.from_edges(15, edges)
    dense = np.zeros((15, 15))
    for i in range(15):
        dense[i, g.neighbors(i)] = g.neighbor_weights(i)
        assert np.all(np.diff(g.neighbors(i)) > 0)
    np.testing.assert_array_equal(dense, dense.T)
    assert np.all(np.diag(dense) == 0)
    assert np.all(g.weights > 0)
    assert g.degree().sum() == 2 * g.edge_count


@settings(max_examples=50, deadline=None)
@given(edge_lists)
def test_round_trip(tmp_path_factory, edges):
    g = AttributedGraph.from_edges([f"v{i}" for i in range(15)], edges)
    path = tmp_path_factory.mktemp("rt") / "edges.txt"
    save_edges(g, path)
    again = load_edges(path)
    assert adjacency_by_name(again) == adjacency_by_name(g)


def test_attribute_round_trip(write, tmp_path):
    g = load_attrs(load_edges(write("a b\nb c\n")), write("a w 1.5\nc v 0\nb w 2\n"))
    save_edges(g, tmp_path / "e.txt")
    save_attrs(g, tmp_path / "a.txt")
    again = load_attrs(load_edges(tmp_path / "e.txt"), tmp_path / "a.txt")
    for name in "abc":
        i, k = g.node_vocab.id(name), again.node_vocab.id(name)
        got = {again.attr_vocab.name(c): v for c, v in zip(*again.attr_row(k))}
        want = {g.attr_vocab.name(c): v for c, v in zip(*g.attr_row(i))}
        assert got == want


def test_observation_mask_matches_entries():
    rng = np.random.default_rng(5)
    cells = {(int(i), int(j)): float(v) for i, j, v in
             zip(rng.integers(0, 8, 30), rng.integers(0, 6, 30), rng.integers(0, 3, 30))}
    g = AttributedGraph.from_edges(8, [], [str(j) for j in range(6)],
                                   [(i, j, v) for (i, j), v in cells.items()])
    for i in range(8):
        for j in range(6):
            assert g.observed(i, j) == int((i, j) in cells)
    np.testing.assert_array_equal(g.mask_matrix().sum(), len(cells))


def test_graph_arrays_are_read_only(triangle):
    with pytest.raises(ValueError):
        triangle.indices[0] = 2
