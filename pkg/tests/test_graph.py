import pytest
from hypothesis import given, settings, strategies as st

from graphfuse.graph import (
    BOT, Edge, Graph, GraphError, Path, enumerate_paths, extend,
    format_edge_list, is_bot, parse_edge_list, path_fn,
)


def paths_set(ps):
    return {p.vertices for p in ps}


def test_enumerate_paths_g1(g1):
    got = enumerate_paths(g1, dest=2, source=0, max_len=3)
    assert paths_set(got) == {(0, 2), (0, 1, 2)}


def test_enumerate_single_vertex():
    g = Graph(1, ())
    assert paths_set(enumerate_paths(g, 0, None, 5)) == {(0,)}


def test_enumerate_no_back_edges(g1):
    assert enumerate_paths(g1, dest=0, source=1, max_len=3) == ()


def test_enumerate_zero_length_membership(g1):
    # the zero-length path appears when source is absent or equals dest
    assert (2,) in paths_set(enumerate_paths(g1, 2, None, 2))
    assert (2,) in paths_set(enumerate_paths(g1, 2, 2, 2))
    assert (2,) not in paths_set(enumerate_paths(g1, 2, 0, 2))


def test_enumerate_ordering_canonical(g1):
    got = enumerate_paths(g1, 2, None, 3)
    assert list(got) == sorted(got, key=lambda p: (p.length, p.vertices))


def test_enumerate_out_of_range(g1):
    with pytest.raises(GraphError):
        enumerate_paths(g1, 7, None, 2)


def test_path_fns(g1):
    p = Path((0, 1, 2))
    assert path_fn("weight", p, g1) == 3
    assert path_fn("capacity", p, g1) == 3
    assert path_fn("length", p, g1) == 2
    assert path_fn("head", p, g1) == 0
    assert path_fn("penultimate", p, g1) == 1


def test_path_fns_zero_length(g1):
    z = Path.zero(0)
    assert path_fn("length", z, g1) == 0
    assert path_fn("weight", z, g1) == 0
    assert is_bot(path_fn("capacity", z, g1))
    assert path_fn("penultimate", z, g1) == 0


def test_path_fn_invalid_path(g1):
    with pytest.raises(GraphError):
        path_fn("weight", Path((2, 0)), g1)


def test_extend(g1):
    assert extend(Path((0, 1)), g1.edge(1, 2)).vertices == (0, 1, 2)
    p = extend(Path.zero(0), g1.edge(0, 1))
    assert p.vertices == (0, 1) and p.length == 1
    with pytest.raises(GraphError):
        extend(Path((0, 1)), g1.edge(0, 2))


def test_extension_laws(g1):
    p = Path((0, 1))
    e = g1.edge(1, 2)
    q = extend(p, e)
    assert path_fn("weight", q, g1) == path_fn("weight", p, g1) + e.weight
    assert path_fn("length", q, g1) == path_fn("length", p, g1) + 1
    cap_p = path_fn("capacity", p, g1)
    expected = e.capacity if is_bot(cap_p) else min(cap_p, e.capacity)
    assert path_fn("capacity", q, g1) == expected


def test_self_loop_rejected():
    with pytest.raises(GraphError):
        Graph(2, (Edge(1, 1, 1, 1),))


def test_endpoint_range_checked():
    with pytest.raises(GraphError):
        Graph(2, (Edge(0, 5, 1, 1),))


def test_simple_path():
    assert Path((0, 1, 0, 2)).simple().vertices == (0, 2)
    assert Path((0, 1, 2)).simple().vertices == (0, 1, 2)
    assert Path((0, 1, 2, 1, 3)).simple().vertices == (0, 1, 3)


def test_graph_props():
    g = Graph(3, (Edge(0, 1), Edge(1, 2), Edge(2, 0)))
    assert not g.is_acyclic()
    assert g.on_cycle(0)
    dag = Graph(3, (Edge(0, 1), Edge(1, 2)))
    assert dag.is_acyclic()
    assert not dag.on_cycle(0)
    assert dag.reachable_from(0) == {0, 1, 2}
    assert dag.reachable_from(2) == {2}
    assert dag.longest_simple_path_length() == 2


def test_edge_list_roundtrip(g1):
    text = format_edge_list(g1)
    g2 = parse_edge_list(text)
    assert g2 == g1
    und = Graph.undirected(3, [(0, 1, 2, 3)])
    assert parse_edge_list(format_edge_list(und)) == und


def test_edge_list_comments_and_errors():
    g = parse_edge_list("# comment\nvertices 2 directed\n0 1 3 4  # tail\n")
    assert g.edges == (Edge(0, 1, 3, 4),)
    with pytest.raises(GraphError):
        parse_edge_list("0 1 2 3\n")
    with pytest.raises(GraphError):
        parse_edge_list("vertices 2 directed\n0 1 2\n")


@given(st.integers(2, 5), st.integers(0, 4), st.data())
@settings(max_examples=40, deadline=None)
def test_truncation_monotone(n, max_len, data):
    """Enumeration at bound L is exactly the length-filtered enumeration at
    L+1."""
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    chosen = data.draw(st.lists(st.sampled_from(pairs), unique=True, max_size=8))
    g = Graph(n, tuple(Edge(u, v, 1, 1) for (u, v) in chosen))
    small = enumerate_paths(g, 0, None, max_len)
    big = enumerate_paths(g, 0, None, max_len + 1)
    assert [p for p in big if p.length <= max_len] == list(small)


def test_acyclic_stabilizes():
    g = Graph(4, (Edge(0, 1), Edge(1, 2), Edge(2, 3)))
    stable = enumerate_paths(g, 3, None, 3)
    for extra in (4, 5, 8):
        assert enumerate_paths(g, 3, None, extra) == stable


def test_overflow_checked(g1):
    from graphfuse.graph import checked_int

    with pytest.raises(OverflowError):
        checked_int(2**63)
    assert checked_int(2**62) == 2**62
