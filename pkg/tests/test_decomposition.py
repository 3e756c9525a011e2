import math

import pytest
from hypothesis import given, settings

from glauberflow.decomposition import (
    TreeDecomposition,
    build_separator_tree,
    check_separator_tree,
    compute_decomposition,
    decomposition_width,
    find_balanced_separator,
    format_decomposition,
    min_fill_order,
    parse_decomposition,
    validate_decomposition,
)
from glauberflow.graphs import generate, make_graph

from test_graphs import small_graphs


def test_validate_good_p3():
    g = generate("path", 3)
    td = TreeDecomposition((frozenset({0, 1}), frozenset({1, 2})), ((0, 1),))
    rep = validate_decomposition(g, td)
    assert rep.ok


def test_validate_missing_edge():
    g = generate("path", 3)
    td = TreeDecomposition((frozenset({0, 1}), frozenset({2})), ((0, 1),))
    rep = validate_decomposition(g, td)
    assert not rep.edge_cover_ok
    assert "(1, 2)" in rep.witness


def test_validate_disconnected_subtree():
    g = make_graph(3, [(0, 1), (1, 2)])
    bags = (frozenset({0, 1}), frozenset({1, 2}), frozenset({0, 1}))
    td = TreeDecomposition(bags, ((0, 1), (1, 2)))
    rep = validate_decomposition(g, td)
    assert not rep.connectivity_ok


def test_width():
    assert decomposition_width(TreeDecomposition((frozenset({0, 1}), frozenset({1, 2})), ((0, 1),))) == 1
    assert decomposition_width(TreeDecomposition((frozenset({0, 1, 2}),), ())) == 2
    with pytest.raises(ValueError):
        decomposition_width(TreeDecomposition((), ()))


def test_triangle_single_bag_width_two():
    g = generate("cycle", 3)
    td = TreeDecomposition((frozenset({0, 1, 2}),), ())
    assert validate_decomposition(g, td).ok
    assert decomposition_width(td) == 2


@pytest.mark.parametrize("family,n,k,width", [
    ("path", 7, 1, 1),
    ("random_tree", 7, 1, 1),
    ("cycle", 5, 1, 2),
    ("partial_k_tree", 10, 2, 2),
    ("partial_k_tree", 10, 3, 3),
])
def test_compute_decomposition_widths(family, n, k, width):
    g = generate(family, n, seed=7, k=k)
    td = compute_decomposition(g)
    assert validate_decomposition(g, td).ok
    assert decomposition_width(td) <= width


def test_single_vertex_decomposition():
    g = generate("path", 1)
    td = compute_decomposition(g)
    assert td.bags == (frozenset({0}),)
    assert decomposition_width(td) == 0


def test_min_fill_handles_disconnected():
    g = make_graph(4, [(0, 1), (2, 3)])
    td = compute_decomposition(g)
    assert validate_decomposition(g, td).ok


def test_separator_p3():
    g = generate("path", 3)
    x, a, b = find_balanced_separator(g, compute_decomposition(g))
    assert x == (1,) and a == (0,) and b == (2,)


def test_separator_p7_middle():
    g = generate("path", 7)
    x, a, b = find_balanced_separator(g, compute_decomposition(g))
    assert x == (3,)
    assert sorted(a + b) == [0, 1, 2, 4, 5, 6]


def test_separator_k2_degenerate():
    g = generate("path", 2)
    x, a, b = find_balanced_separator(g, compute_decomposition(g))
    assert len(x) == 1 and b == ()


def test_separator_balance_and_no_cross_edges():
    for family, n, k in [("cycle", 9, 1), ("partial_k_tree", 10, 3), ("grid", 3, 1), ("random_tree", 12, 1)]:
        g = generate(family, n, seed=3, k=k)
        x, a, b = find_balanced_separator(g, compute_decomposition(g))
        aset, bset = set(a), set(b)
        for u, v in g.edges:
            assert not ((u in aset and v in bset) or (u in bset and v in aset))
        assert len(a) <= 2 * g.n / 3 + 1e-9
        assert len(b) <= 2 * g.n / 3 + 1e-9


def test_separator_tree_depth_bound():
    for family, n, k in [("path", 15, 1), ("path", 12, 1), ("cycle", 12, 1),
                         ("random_tree", 12, 1), ("partial_k_tree", 10, 2), ("grid", 3, 1)]:
        g = generate(family, n, seed=5, k=k)
        st = build_separator_tree(g)
        check_separator_tree(g, st)
        size = g.n
        assert st.depth <= math.ceil(math.log(max(size, 2)) / math.log(1.5)) + 1


def test_separator_tree_leaf():
    st = build_separator_tree(generate("path", 1))
    assert st.is_leaf and st.depth == 0


def test_separator_tree_p3():
    st = build_separator_tree(generate("path", 3))
    assert st.x == (1,)
    assert st.child_a.is_leaf and st.child_b.is_leaf


def test_augmented_sides():
    st = build_separator_tree(generate("path", 5))
    assert set(st.augmented_side_a()) == set(st.side_a) | set(st.x)


def test_separator_tree_disconnected_virtual_root():
    g = make_graph(4, [(0, 1), (2, 3)])
    st = build_separator_tree(g)
    assert st.x == ()
    check_separator_tree(g, st)


@settings(max_examples=30, deadline=None)
@given(small_graphs())
def test_decomposition_always_validates(g):
    td = compute_decomposition(g)
    assert validate_decomposition(g, td).ok


@settings(max_examples=30, deadline=None)
@given(small_graphs())
def test_separator_tree_invariants(g):
    check_separator_tree(g, build_separator_tree(g))


def test_serialization_round_trip():
    g = generate("cycle", 6)
    td = compute_decomposition(g)
    text = format_decomposition(td)
    assert text.splitlines()[0] == str(td.k)
    td2 = parse_decomposition(text)
    assert td2 == td
