import random
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoculture.graph import (EmptyGraphError, SnapshotGraph, average_clustering, build_snapshot,
                              clustering_by_node, edge_list, graph_summary, local_clustering,
                              yearly_windows)
from geoculture.ingest import Transition

from .oracles import brute_force_average_clustering, brute_force_clustering

W1, W2, W3 = yearly_windows()


def ts(y, m=6):
    return datetime(y, m, 1, tzinfo=timezone.utc)


def graph(edges, window=W1):
    nodes = frozenset(v for e in edges for v in e)
    return SnapshotGraph(window.t, window, nodes, {e: 1 for e in edges})


def test_windows_are_contiguous_calendar_years():
    assert [w.t for w in (W1, W2, W3)] == [1, 2, 3]
    assert W1.start == ts(2011, 1) and W1.end == W2.start and W3.end == ts(2014, 1)
    assert ts(2011, 1) in W1 and W1.end not in W1


def test_build_aggregates_counts_and_filters_window():
    trs = [Transition("a", "b", ts(2011), 2), Transition("a", "b", ts(2011, 9), 3),
           Transition("b", "c", ts(2012)), Transition("c", "a", ts(2011))]
    g = build_snapshot(trs, W1)
    assert g.edges == {("a", "b"): 5, ("c", "a"): 1}
    assert g.nodes == {"a", "b", "c"}
    assert build_snapshot(trs, W2).nodes == {"b", "c"}


def test_three_cycle_clustering():
    g = graph([("a", "b"), ("b", "c"), ("c", "a")])
    # each node: k = 2, one directed edge among its two neighbours
    assert local_clustering(g, "a") == 0.5
    assert average_clustering(g) == 0.5


def test_complete_digraph_has_unit_clustering():
    nodes = "abcde"
    g = graph([(u, v) for u in nodes for v in nodes if u != v])
    assert all(c == 1.0 for c in clustering_by_node(g).values())


def test_star_is_zero_and_leaf_k1():
    g = graph([("h", x) for x in "abc"])
    assert clustering_by_node(g) == dict.fromkeys("abch", 0.0)


def test_reciprocal_pair_counts_once_in_k():
    g = graph([("a", "b"), ("b", "a"), ("a", "c"), ("b", "c")])
    # a: neighbours {b, c}; edges among them b->c only
    assert local_clustering(g, "a") == 0.5


def test_unknown_node_and_empty_graph():
    g = graph([("a", "b")])
    with pytest.raises(KeyError):
        local_clustering(g, "zz")
    empty = SnapshotGraph(1, W1, frozenset(), {})
    with pytest.raises(EmptyGraphError):
        graph_summary(empty)


def test_self_loop_rejected():
    with pytest.raises(ValueError):
        graph([("a", "a")])


def test_summary_degree():
    g = graph([("a", "b"), ("b", "c"), ("c", "a"), ("a", "c")])
    s = graph_summary(g)
    assert (s.node_count, s.edge_count, s.avg_degree) == (3, 4, 8 / 3)
    assert s.to_dict()["avg_degree"] == 8 / 3


def test_edge_list_is_sorted_csv():
    trs = [Transition("b", "a", ts(2011)), Transition("a", "b", ts(2011), 4)]
    assert edge_list(build_snapshot(trs, W1)) == "a,b,4\nb,a,1\n"


def random_digraph(rng, n, p):
    names = [f"v{i:02d}" for i in range(n)]
    return names, [(u, v) for u in names for v in names if u != v and rng.random() < p]


@pytest.mark.parametrize("seed", range(20))
def test_matches_brute_force(seed):
    rng = random.Random(seed)
    names, edges = random_digraph(rng, rng.randint(2, 25), rng.random())
    if not edges:
        edges = [(names[0], names[1])]
    g = graph(edges)
    lk = brute_force_clustering(sorted(g.nodes), edges)
    for v, c in clustering_by_node(g).items():
        l, k = lk[v]
        assert c == (0.0 if k <= 1 else l / (k * (k - 1)))
    assert average_clustering(g) == brute_force_average_clustering(sorted(g.nodes), edges)


_edges = st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)).filter(lambda e: e[0] != e[1]),
                  min_size=1, max_size=60)


@settings(max_examples=100, deadline=None)
@given(_edges)
def test_clustering_bounds_and_relabel_invariance(pairs):
    edges = sorted({(f"n{u}", f"n{v}") for u, v in pairs})
    g = graph(edges)
    local = clustering_by_node(g)
    assert all(0.0 <= c <= 1.0 for c in local.values())
    relabel = {f"n{i}": f"m{9 - i}" for i in range(10)}
    h = graph([(relabel[u], relabel[v]) for u, v in edges])
    assert sorted(clustering_by_node(h).values()) == sorted(local.values())


@settings(max_examples=100, deadline=None)
@given(_edges, st.integers(1, 50))
def test_weights_do_not_change_structure_stats(pairs, w):
    edges = sorted({(f"n{u}", f"n{v}") for u, v in pairs})
    nodes = frozenset(x for e in edges for x in e)
    g1 = SnapshotGraph(1, W1, nodes, {e: 1 for e in edges})
    g2 = SnapshotGraph(1, W1, nodes, {e: w for e in edges})
    assert graph_summary(g1) == graph_summary(g2)
