import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp

from glauberflow.chains import ChainParams
from glauberflow.graphs import generate, make_graph
from glauberflow.statespace import (
    StateCapExceeded,
    StateSpace,
    build_state_space,
    check_connectivity,
    detailed_balance_residual,
    distribution_evolution,
    dump_space,
    enumerate_states,
    exact_conductance,
    exact_expansion,
    exact_mixing_time,
    exact_stationary,
    load_space,
)


def fib(k):
    a, b = 0, 1
    for _ in range(k):
        a, b = b, a + b
    return a


def lucas(k):
    a, b = 2, 1
    for _ in range(k):
        a, b = b, a + b
    return a


def test_enumeration_oracles():
    p = ChainParams("independent_set")
    for n in range(1, 9):
        assert len(enumerate_states(generate("path", n), p)) == fib(n + 2)
    for n in range(3, 9):
        assert len(enumerate_states(generate("cycle", n), p)) == lucas(n)


def test_enumeration_examples():
    p = ChainParams("independent_set")
    assert len(enumerate_states(generate("path", 3), p)) == 5
    assert len(enumerate_states(generate("cycle", 4), p)) == 7
    pm = ChainParams("maximal_independent_set")
    assert enumerate_states(generate("path", 3), pm) == [0b010, 0b101]


def test_enumeration_cap():
    with pytest.raises(StateCapExceeded):
        enumerate_states(generate("path", 8), ChainParams("independent_set"), cap=10)


def test_canonical_order():
    states = enumerate_states(generate("path", 4), ChainParams("independent_set"))
    assert states == sorted(states)


def test_p3_space_structure():
    sp_ = build_state_space(generate("path", 3), ChainParams("independent_set"))
    assert sp_.n_states == 5
    assert sp_.delta_m == 3
    edges = {(sp_.states[i], sp_.states[j]) for i, j in sp_.edges}
    assert edges == {(0, 1), (0, 2), (0, 4), (1, 5), (4, 5)}


def test_single_vertex_space():
    sp_ = build_state_space(generate("path", 1), ChainParams("independent_set"))
    assert sp_.n_states == 2 and len(sp_.edges) == 1


def test_k2_colorings_q3():
    sp_ = build_state_space(generate("path", 2), ChainParams("q_coloring", q=3))
    assert sp_.n_states == 6
    # every move is reversible, so directed adjacencies come in pairs
    assert all(len(sp_.adjacency[i]) == 2 for i in range(6))


def test_connectivity_and_witness():
    sp_ = build_state_space(generate("path", 3), ChainParams("independent_set"))
    ok, witness = check_connectivity(sp_)
    assert ok and witness is None
    # q = 3 on a triangle freezes every proper coloring
    frozen = build_state_space(generate("cycle", 3), ChainParams("q_coloring", q=3))
    ok, witness = check_connectivity(frozen)
    assert not ok and witness is not None


def test_stationary_weights_and_z():
    sp_ = build_state_space(generate("path", 3), ChainParams("independent_set", lam=2.0))
    assert sp_.zsum == pytest.approx(11.0)
    pi = exact_stationary(sp_)
    assert pi[sp_.index[0b101]] == pytest.approx(4 / 11)
    uni = exact_stationary(build_state_space(generate("path", 3), ChainParams("independent_set")))
    assert np.allclose(uni, 1 / 5)


def test_detailed_balance_residual():
    for lam in (0.5, 1.0, 2.0):
        sp_ = build_state_space(generate("cycle", 5), ChainParams("independent_set", lam=lam))
        assert detailed_balance_residual(sp_) < 1e-12


def test_rows_sum_to_one():
    sp_ = build_state_space(generate("cycle", 5), ChainParams("csds", lam=0.5))
    rows = np.asarray(sp_.transition.sum(axis=1)).ravel()
    assert np.abs(rows - 1).max() < 1e-12


def test_expansion_examples():
    assert exact_expansion(generate("path", 2)) == 1
    assert exact_expansion(generate("path", 3)) == 1
    assert exact_expansion(generate("cycle", 4)) == 1
    with pytest.raises(ValueError):
        exact_expansion(generate("path", 8), limit=5)


def _two_state_quarter_chain():
    # lazy symmetric two-state chain with P(x, y) = 1/4: Q = 1/8, pi = 1/2
    tr = sp.csr_matrix(np.array([[0.75, 0.25], [0.25, 0.75]]))
    return StateSpace(
        graph=generate("path", 1), params=ChainParams("independent_set"),
        states=[0, 1], index={0: 0, 1: 1}, edges=[(0, 1)],
        edge_tags=[("add", "drop")], adjacency=[[1], [0]],
        weights=np.array([1.0, 1.0]), log_weights=np.zeros(2), zsum=2.0,
        delta_m=1, normalizer=2.0, transition=tr,
    )


def test_conductance_two_state_closed_form():
    assert exact_conductance(_two_state_quarter_chain()) == Fraction(1, 4)
    # the actual single-vertex walk is faster: P(x, y) = 1/2, phi = 1/2
    sp_ = build_state_space(generate("path", 1), ChainParams("independent_set"))
    assert sp_.transition[0, 1] == pytest.approx(0.5)
    assert exact_conductance(sp_) == Fraction(1, 2)


def test_conductance_matches_expansion_structure():
    # at lam = 1 the 5-state chain has Q(e) = 1/(2 n) per edge and uniform pi
    g = generate("path", 3)
    sp_ = build_state_space(g, ChainParams("independent_set"))
    phi = exact_conductance(sp_)
    h = exact_expansion(sp_)
    assert phi == h * Fraction(1, 6)  # h/(2n) with n = 3


def test_evolution_point_mass_and_monotone():
    sp_ = build_state_space(generate("path", 3), ChainParams("independent_set", lam=2.0))
    pi = exact_stationary(sp_)
    curve = distribution_evolution(sp_, 0, 200)
    assert curve[0] == pytest.approx(1 - pi[0])
    assert curve[-1] < 1e-6
    assert all(b <= a + 1e-12 for a, b in zip(curve, curve[1:]))


def test_evolution_eigenvalue_half():
    # two-state walk with second eigenvalue 1/2 halves TV every step
    space = _two_state_quarter_chain()
    curve = distribution_evolution(space, 0, 4)
    assert curve == pytest.approx([0.5, 0.25, 0.125, 0.0625, 0.03125])
    # TV after one step sits exactly on the 1/4 boundary; strict means t = 2
    assert exact_mixing_time(space, 0.25) == 2


def test_mixing_time_trivial_and_antitone():
    single = build_state_space(make_graph(0, []), ChainParams("independent_set"))
    assert exact_mixing_time(single) == 0
    sp_ = build_state_space(generate("path", 4), ChainParams("independent_set", lam=0.5))
    taus = [exact_mixing_time(sp_, eps) for eps in (0.5, 0.25, 0.1, 0.01)]
    assert taus == sorted(taus)


def test_p3_mixing_regression():
    sp_ = build_state_space(generate("path", 3), ChainParams("independent_set"))
    # frozen oracle value: worst-start TV drops below 1/4 after 8 steps
    assert exact_mixing_time(sp_, 0.25) == 8


def test_dump_round_trip():
    sp_ = build_state_space(generate("cycle", 4), ChainParams("independent_set", lam=2.0))
    text = dump_space(sp_)
    sp2 = load_space(text)
    assert sp2.states == sp_.states and sp2.edges == sp_.edges


def test_dump_round_trip_coloring():
    sp_ = build_state_space(generate("path", 3), ChainParams("partial_q_coloring", q=2))
    sp2 = load_space(dump_space(sp_))
    assert sp2.states == sp_.states
