import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glauberflow.graphs import (
    Graph,
    GraphParseError,
    connected_components,
    format_graph,
    generate,
    induced_subgraph,
    is_connected,
    load_graph,
    make_graph,
    parse_graph,
    rng_stream,
    save_graph,
)


@st.composite
def small_graphs(draw, max_n=7):
    n = draw(st.integers(1, max_n))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    mask = draw(st.integers(0, 2 ** len(pairs) - 1))
    edges = [p for i, p in enumerate(pairs) if (mask >> i) & 1]
    return make_graph(n, edges)


def test_parse_p3():
    g = parse_graph("3 2\n0 1\n1 2\n")
    assert g.n == 3 and g.edges == ((0, 1), (1, 2))


def test_parse_single_vertex():
    g = parse_graph("1 0\n")
    assert g.n == 1 and g.m == 0


def test_parse_b_section():
    g = parse_graph("3 2\n0 1\n1 2\n#b\n0 2\n1 1\n2 1\n")
    assert g.b_values == (2, 1, 1)


def test_parse_roles_and_lists():
    g = parse_graph("2 1\n0 1\n#lists\n0 1 2\n1 2 3\n#roles\n0 steiner\n1 forbidden\n")
    assert g.color_lists == (frozenset({1, 2}), frozenset({2, 3}))
    assert g.roles == ("steiner", "forbidden")


@pytest.mark.parametrize("text,lineno", [
    ("3\n", 1),
    ("2 1\n0 0\n", 2),
    ("2 2\n0 1\n1 0\n", 3),
    ("2 1\n0 5\n", 2),
    ("2 1\n0 1\n#wat\n", 3),
    ("2 1\n0 1\n#lists\n0 0\n", 4),
    ("2 1\n0 1\n#b\n0 -1\n", 4),
])
def test_parse_errors_name_lines(text, lineno):
    with pytest.raises(GraphParseError) as exc:
        parse_graph(text)
    assert exc.value.line_no == lineno
    assert f"line {lineno}" in str(exc.value)


def test_save_load_round_trip(tmp_path):
    g = parse_graph("3 2\n0 1\n1 2\n#b\n0 2\n1 1\n2 1\n")
    path = tmp_path / "g.txt"
    save_graph(g, path)
    first = path.read_bytes()
    save_graph(load_graph(path), path)
    assert path.read_bytes() == first


@settings(max_examples=40, deadline=None)
@given(small_graphs())
def test_format_parse_round_trip(g):
    assert parse_graph(format_graph(g)) == g


def test_generate_path_and_cycle():
    p5 = generate("path", 5)
    assert p5.n == 5 and p5.m == 4
    tri = generate("cycle", 3)
    assert tri.m == 3
    with pytest.raises(ValueError):
        generate("cycle", 2)
    with pytest.raises(ValueError):
        generate("nonsense", 4)


def test_generate_deterministic():
    a = generate("random_tree", 9, seed=42)
    b = generate("random_tree", 9, seed=42)
    c = generate("random_tree", 9, seed=43)
    assert a == b
    assert a.edges != c.edges
    assert is_connected(a) and a.m == 8


def test_generate_partial_k_tree_connected():
    for seed in range(5):
        g = generate("partial_k_tree", 10, seed=seed, k=2)
        assert is_connected(g)


def test_grid():
    g = generate("grid", 3)
    assert g.n == 9 and g.m == 12


def test_induced_subgraph_keeps_annotations():
    g = parse_graph("4 3\n0 1\n1 2\n2 3\n#b\n0 1\n1 2\n2 1\n3 1\n")
    sub, vmap = induced_subgraph(g, [1, 2, 3])
    assert sub.n == 3 and sub.m == 2
    assert sub.b_values == (2, 1, 1)
    assert vmap == {1: 0, 2: 1, 3: 2}


def test_components():
    g = make_graph(4, [(0, 1), (2, 3)])
    assert connected_components(g) == [[0, 1], [2, 3]]
    assert not is_connected(g)


def test_rng_streams_are_stable_and_distinct():
    a = rng_stream(5, 0).integers(0, 1000, size=4).tolist()
    b = rng_stream(5, 0).integers(0, 1000, size=4).tolist()
    c = rng_stream(5, 1).integers(0, 1000, size=4).tolist()
    assert a == b != c
