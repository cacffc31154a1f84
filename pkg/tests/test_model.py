"""Instance representation: conflicts, congestion, generators, file format."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tmgreedy import (
    AccessSet,
    ColumnClustered,
    ConflictGraph,
    DegreeCapped,
    GenerationError,
    ObjectUniform,
    TxId,
    WindowFormatError,
    WindowSpec,
    congestion,
    derive_conflicts,
    generate_window,
    restrict,
)
from tmgreedy.model import dump_window, parse_window, transactions

from conftest import access_maps, edge_windows

A, B, C = TxId(1, 1), TxId(2, 1), TxId(3, 1)


def test_access_set_write_wins():
    acc = AccessSet(reads={1, 2}, writes={2, 3})
    assert acc.reads == frozenset({1})
    assert acc.writes == frozenset({2, 3})


def test_derive_conflicts_write_write():
    accesses = {A: AccessSet(writes={1}), B: AccessSet(writes={1})}
    g = derive_conflicts(2, 1, accesses)
    assert g.has_edge(A, B)


def test_derive_conflicts_read_read_is_not_a_conflict():
    accesses = {A: AccessSet(reads={1}), B: AccessSet(reads={1})}
    g = derive_conflicts(2, 1, accesses)
    assert g.edge_count() == 0


def test_derive_conflicts_three_transactions():
    # A writes O1, B reads O1, C touches nothing: the only edge is (A, B)
    accesses = {A: AccessSet(writes={1}), B: AccessSet(reads={1}), C: AccessSet()}
    g = derive_conflicts(3, 1, accesses)
    assert g.edges() == ((A, B),)
    assert g.degree(A) == 1
    assert g.degree(C) == 0


@given(access_maps())
def test_derive_conflicts_symmetric_and_self_edge_free(data):
    m, n, accesses, _ = data
    g = derive_conflicts(m, n, accesses)
    for tx, nbrs in g.adjacency.items():
        assert tx not in nbrs
        for other in nbrs:
            assert tx in g.adjacency[other]


@given(access_maps())
def test_derive_conflicts_matches_pairwise_rule(data):
    m, n, accesses, _ = data
    g = derive_conflicts(m, n, accesses)
    txs = transactions(m, n)
    for i, a in enumerate(txs):
        for b in txs[i + 1:]:
            assert g.has_edge(a, b) == accesses[a].conflicts_with(accesses[b])


def test_congestion_edgeless():
    g = ConflictGraph.from_edges([TxId(1, j) for j in range(1, 7)], ())
    assert congestion(g) == 0


def test_congestion_star():
    center = TxId(1, 1)
    leaves = [TxId(2, 1), TxId(3, 1), TxId(4, 1)]
    g = ConflictGraph.from_edges([center] + leaves, [(center, leaf) for leaf in leaves])
    assert congestion(g) == 3


def test_congestion_four_cycle():
    a, b, c, d = (TxId(i, 1) for i in range(1, 5))
    g = ConflictGraph.from_edges([a, b, c, d], [(a, b), (b, c), (c, d), (d, a)])
    assert congestion(g) == 2
    assert all(g.degree(x) == 2 for x in (a, b, c, d))


def test_restrict_empty():
    a, b = TxId(1, 1), TxId(2, 1)
    g = ConflictGraph.from_edges([a, b], [(a, b)])
    assert restrict(g, ()).adjacency == {}


def test_restrict_cycle_to_edge():
    a, b, c, d = (TxId(i, 1) for i in range(1, 5))
    g = ConflictGraph.from_edges([a, b, c, d], [(a, b), (b, c), (c, d), (d, a)])
    sub = restrict(g, {a, b})
    assert sub.edges() == ((a, b),)


def test_restrict_star_leaves_edgeless():
    center = TxId(1, 1)
    leaves = [TxId(2, 1), TxId(3, 1), TxId(4, 1)]
    g = ConflictGraph.from_edges([center] + leaves, [(center, leaf) for leaf in leaves])
    sub = restrict(g, leaves)
    assert sub.edge_count() == 0
    assert set(sub.nodes) == set(leaves)


def test_restrict_unknown_node():
    g = ConflictGraph.from_edges([A], ())
    with pytest.raises(ValueError):
        restrict(g, {TxId(9, 9)})


@given(edge_windows())
def test_restrict_never_increases_congestion(window):
    nodes = [tx for tx in window.transactions if (tx.thread + tx.index) % 2 == 0]
    assert congestion(restrict(window.graph, nodes)) <= congestion(window.graph)


# --- generators ---------------------------------------------------------------

def test_degree_capped_zero_cap_forbids_all_edges():
    w = generate_window(2, 2, DegreeCapped(c_target=0, edge_prob=0.5), seed=7)
    assert len(w.transactions) == 4
    assert w.graph.edge_count() == 0


def test_generate_is_deterministic():
    model = DegreeCapped(c_target=3, edge_prob=0.4)
    assert generate_window(4, 3, model, seed=7) == generate_window(4, 3, model, seed=7)


def test_object_uniform_all_writers_is_complete():
    w = generate_window(4, 4, ObjectUniform(s=1, read_prob=0.0, write_prob=1.0), seed=1)
    assert w.congestion == 15
    assert w.graph.edge_count() == 16 * 15 // 2


def test_degree_capped_unsatisfiable():
    with pytest.raises(GenerationError):
        generate_window(2, 2, DegreeCapped(c_target=0, edge_prob=1.0), seed=1)


def test_degree_capped_full_demand_satisfiable_at_max_cap():
    w = generate_window(2, 2, DegreeCapped(c_target=3, edge_prob=1.0), seed=1)
    assert w.graph.edge_count() == 6


@settings(max_examples=40)
@given(
    st.integers(1, 4),
    st.integers(1, 4),
    st.integers(0, 8),
    st.floats(0.0, 0.99),
    st.integers(0, 10_000),
)
def test_degree_capped_respects_cap(m, n, cap, p, seed):
    cap = min(cap, m * n - 1)
    w = generate_window(m, n, DegreeCapped(c_target=cap, edge_prob=p), seed)
    assert w.congestion <= cap


def test_column_clustered_extremes():
    w = generate_window(3, 3, ColumnClustered(intra_prob=1.0, inter_prob=0.0), seed=5)
    for a, b in w.graph.edges():
        assert a.index == b.index
    # every same-column pair is present
    assert w.graph.edge_count() == 3 * 3


def test_generator_rejects_bad_probability():
    with pytest.raises(ValueError):
        generate_window(2, 2, ColumnClustered(intra_prob=1.5, inter_prob=0.0), seed=0)


# --- file format ----------------------------------------------------------------

@given(edge_windows())
def test_edge_file_round_trip(window):
    assert parse_window(dump_window(window)) == window


@given(access_maps())
def test_access_file_round_trip(data):
    m, n, accesses, s = data
    window = WindowSpec.from_accesses(m, n, accesses, s)
    again = parse_window(dump_window(window))
    assert again == window
    assert again.accesses is not None


def test_parse_rejects_mixed_forms():
    text = "window 2 2\nobjects 3\naccess 1 1 R:1 W:\nedge 1 1 2 1\n"
    with pytest.raises(WindowFormatError):
        parse_window(text)
    text = "window 2 2\nedge 1 1 2 1\naccess 1 2 R:1 W:\n"
    with pytest.raises(WindowFormatError):
        parse_window(text)


def test_parse_rejects_missing_header():
    with pytest.raises(WindowFormatError):
        parse_window("edge 1 1 2 1\n")


def test_parse_rejects_out_of_range_transaction():
    with pytest.raises(WindowFormatError):
        parse_window("window 2 2\nedge 1 1 3 1\n")


def test_parse_rejects_objects_in_edge_file():
    with pytest.raises(WindowFormatError):
        parse_window("window 2 2\nobjects 3\nedge 1 1 2 1\n")


def test_parse_rejects_access_file_without_objects():
    with pytest.raises(WindowFormatError):
        parse_window("window 1 1\naccess 1 1 R:1 W:\n")


def test_parse_allows_comments_and_blank_lines():
    text = "# a window\nwindow 2 1\n\nedge 1 1 2 1  # conflict\n"
    w = parse_window(text)
    assert w.graph.edge_count() == 1


def test_window_spec_validates_access_consistency():
    accesses = {A: AccessSet(writes={1}), B: AccessSet(writes={1})}
    graph = ConflictGraph.from_edges([A, B], ())  # inconsistent: edge missing
    with pytest.raises(ValueError):
        WindowSpec(2, 1, graph, accesses, 1)
