import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glauberflow import chains
from glauberflow.chains import (
    ChainParams,
    ConfigurationError,
    analytic_degree_bound,
    enumerate_moves,
    initial_state,
    is_valid_state,
    move_probability,
    proposal_normalizer,
    transition_probability,
    unnormalized_weight,
)
from glauberflow.graphs import generate, make_graph, with_annotations

from test_graphs import small_graphs


# independent re-implementations of the structure definitions, used as oracles


def naive_independent(g, mask):
    chosen = [v for v in range(g.n) if (mask >> v) & 1]
    return all((u, v) not in g.edge_index for u in chosen for v in chosen if u < v)


def naive_dominating(g, mask):
    for v in range(g.n):
        if g.role(v) == "forbidden" and (mask >> v) & 1:
            return False
        if g.role(v) in ("normal", "forbidden"):
            if not ((mask >> v) & 1 or any((mask >> u) & 1 for u in g.adjacency[v])):
                return False
    return True


def naive_edge_degrees(g, mask):
    deg = [0] * g.n
    for i, (u, v) in enumerate(g.edges):
        if (mask >> i) & 1:
            deg[u] += 1
            deg[v] += 1
    return deg


def naive_maximal_is(g, mask):
    if not naive_independent(g, mask):
        return False
    for v in range(g.n):
        if not (mask >> v) & 1 and naive_independent(g, mask | (1 << v)):
            return False
    return True


def test_is_valid_independent_p3():
    g = generate("path", 3)
    p = ChainParams("independent_set")
    assert is_valid_state(g, p, 0b101)
    assert not is_valid_state(g, p, 0b011)


def test_single_edge_cover_triangle():
    g = generate("cycle", 3)
    p = ChainParams("b_edge_cover")
    for i in range(3):
        assert not is_valid_state(g, p, 1 << i)
    assert is_valid_state(g, p, 0b111)


def test_maximal_is_p3():
    g = generate("path", 3)
    p = ChainParams("maximal_independent_set")
    assert is_valid_state(g, p, 0b010)
    assert not is_valid_state(g, p, 0b001)  # vertex 2 can still be added


def test_csds_roles():
    g = with_annotations(generate("path", 3), roles=("forbidden", "normal", "steiner"))
    p = ChainParams("csds")
    assert not is_valid_state(g, p, 0b001)      # forbidden selected
    assert is_valid_state(g, p, 0b010)          # dominates 0 and 1; steiner 2 free
    assert not is_valid_state(g, p, 0b100)      # vertex 0 undominated


def test_moves_empty_independent_set():
    g = generate("path", 3)
    p = ChainParams("independent_set")
    moves = enumerate_moves(g, p, 0)
    assert sorted(m for m, _ in moves) == [0b001, 0b010, 0b100]
    assert all(tag == "add" for _, tag in moves)


def test_moves_maximal_is_includes_composite():
    g = generate("path", 3)
    p = ChainParams("maximal_independent_set")
    moves = [m for m, _ in enumerate_moves(g, p, 0b010)]
    assert moves == [0b101]  # drop 1, add 0 and 2


def test_moves_partial_coloring_blank_edge():
    g = generate("path", 2)
    p = ChainParams("partial_q_coloring", q=2)
    moves = enumerate_moves(g, p, (0, 0))
    assert len(moves) == 4  # 2 vertices x 2 colors
    assert all(tag == "add" for _, tag in moves)


def test_partial_coloring_recolor_guard():
    # recoloring to a neighbor's color must not appear as a move
    g = generate("path", 2)
    p = ChainParams("partial_q_coloring", q=2)
    moves = enumerate_moves(g, p, (1, 2))
    targets = {m for m, _ in moves}
    assert (2, 2) not in targets and (1, 1) not in targets


def test_weights():
    p = ChainParams("independent_set", lam=2.0)
    assert unnormalized_weight(p, 0b111) == 8.0
    assert unnormalized_weight(ChainParams("independent_set", lam=1.0), 0b10110) == 1.0
    pc = ChainParams("partial_q_coloring", lam=0.5, q=3)
    assert unnormalized_weight(pc, (1, 0, 2)) == 0.25
    assert unnormalized_weight(ChainParams("q_coloring", lam=5.0, q=3), (1, 2, 1)) == 1.0


def test_transition_probabilities_hardcore():
    g = generate("path", 3)
    p = ChainParams("independent_set", lam=2.0)
    # add move: lam/(n (lam+1)); drop move: 1/(n (lam+1))
    assert transition_probability(g, p, 0, 0b001) == pytest.approx(2 / (3 * 3))
    assert transition_probability(g, p, 0b001, 0) == pytest.approx(1 / (3 * 3))
    with pytest.raises(ValueError):
        transition_probability(g, p, 0b001, 0b110)


def test_row_sums_to_one():
    g = generate("path", 3)
    for lam in (0.5, 1.0, 2.0):
        p = ChainParams("independent_set", lam=lam)
        for s in (0, 0b001, 0b101):
            total = transition_probability(g, p, s, s)
            for t, _ in enumerate_moves(g, p, s):
                total += transition_probability(g, p, s, t)
            assert total == pytest.approx(1.0, abs=1e-12)


def test_maximal_is_degree_bound():
    p = ChainParams("maximal_independent_set")
    for fam, n in [("path", 6), ("cycle", 6)]:
        g = generate(fam, n)
        bound = g.n * 2 ** (g.max_degree ** 2 + g.max_degree)
        assert analytic_degree_bound(g, p) == bound
        from glauberflow.statespace import build_state_space

        sp = build_state_space(g, p)
        assert sp.delta_m <= bound


def test_maximal_degree_guard():
    star = make_graph(8, [(0, i) for i in range(1, 8)])
    with pytest.raises(ConfigurationError):
        enumerate_moves(star, ChainParams("maximal_independent_set"), 1)


def test_initial_states_valid():
    cases = [
        (generate("path", 5), ChainParams("independent_set")),
        (generate("path", 5), ChainParams("b_matching")),
        (generate("cycle", 4), ChainParams("b_edge_cover")),
        (generate("path", 5), ChainParams("csds")),
        (generate("path", 5), ChainParams("maximal_independent_set")),
        (generate("path", 5), ChainParams("maximal_b_matching")),
        (generate("path", 5), ChainParams("q_coloring", q=4)),
        (generate("path", 5), ChainParams("partial_q_coloring", q=3)),
    ]
    for g, p in cases:
        assert is_valid_state(g, p, initial_state(g, p))


def test_greedy_coloring_failure():
    g = with_annotations(generate("path", 2), color_lists=(frozenset({1}), frozenset({1})))
    with pytest.raises(ConfigurationError):
        initial_state(g, ChainParams("q_coloring", q=1))


CHAIN_CASES = [
    ChainParams("independent_set", lam=0.5),
    ChainParams("independent_set", lam=2.0),
    ChainParams("csds"),
    ChainParams("b_matching", lam=2.0),
    ChainParams("b_edge_cover", lam=0.5),
    ChainParams("maximal_independent_set"),
    ChainParams("maximal_b_matching"),
    ChainParams("q_coloring", q=4),
    ChainParams("partial_q_coloring", q=3, lam=2.0),
]


@settings(max_examples=25, deadline=None)
@given(small_graphs(max_n=5), st.sampled_from(CHAIN_CASES))
def test_move_symmetry_and_closure(g, params):
    """s' in moves(s) iff s in moves(s'), and all move targets are valid."""
    if params.kind in chains.MAXIMAL_KINDS and g.max_degree > 4:
        return
    from glauberflow.statespace import enumerate_states

    states = enumerate_states(g, params, cap=50_000)
    move_sets = {}
    for s in states[:200]:
        targets = [t for t, _ in enumerate_moves(g, params, s)]
        assert len(set(targets)) == len(targets)
        for t in targets:
            assert is_valid_state(g, params, t)
        move_sets[s] = set(targets)
    for s, targets in move_sets.items():
        for t in targets:
            if t in move_sets:
                assert s in move_sets[t], (s, t, params.kind)


@settings(max_examples=15, deadline=None)
@given(small_graphs(max_n=5))
def test_validity_against_naive_oracles(g):
    for mask in range(1 << g.n):
        assert is_valid_state(g, ChainParams("independent_set"), mask) == naive_independent(g, mask)
        assert is_valid_state(g, ChainParams("csds"), mask) == naive_dominating(g, mask)
        if g.max_degree <= 4:
            assert is_valid_state(g, ChainParams("maximal_independent_set"), mask) == naive_maximal_is(g, mask)
    for mask in range(1 << g.m):
        deg = naive_edge_degrees(g, mask)
        assert is_valid_state(g, ChainParams("b_matching"), mask) == all(
            deg[v] <= g.b(v) for v in range(g.n)
        )
        assert is_valid_state(g, ChainParams("b_edge_cover"), mask) == all(
            deg[v] >= g.b(v) for v in range(g.n)
        )
