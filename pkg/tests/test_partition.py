import itertools

import pytest

from glauberflow.chains import ChainParams, ConfigurationError
from glauberflow.decomposition import build_separator_tree
from glauberflow.graphs import generate, make_graph, with_annotations
from glauberflow.partition import (
    SeparatorError,
    build_trace_order,
    certify_cartesian_product,
    hierarchical_route,
    partition_by_trace,
    subclass_decompose,
    trace_key,
    undominated_separator_vertices,
    verify_framework_conditions,
    weight_factorization_residual,
)
from glauberflow.statespace import build_state_space


def space_and_partition(g, params):
    sp = build_state_space(g, params)
    part = partition_by_trace(sp, build_separator_tree(g))
    return sp, part


def test_p3_hardcore_classes():
    sp, part = space_and_partition(generate("path", 3), ChainParams("independent_set"))
    assert part.traces == [(), (1,)]
    assert len(part.members[()]) == 4
    assert len(part.members[(1,)]) == 1
    assert len(part.inter_edges[((), (1,))]) == 1


def test_class_count_bounds():
    # hardcore: at most 2^|X| classes; partial colorings: at most (q+1)^|X|
    for fam, n in [("path", 6), ("cycle", 6), ("random_tree", 7)]:
        g = generate(fam, n, seed=2)
        sp, part = space_and_partition(g, ChainParams("independent_set"))
        assert part.num_classes <= 2 ** len(part.x)
    g = generate("path", 4)
    sp, part = space_and_partition(g, ChainParams("partial_q_coloring", q=3))
    assert part.num_classes <= 4 ** len(part.x)


def test_not_a_separator_rejected():
    g = generate("path", 4)
    sp = build_state_space(g, ChainParams("independent_set"))
    with pytest.raises(SeparatorError):
        partition_by_trace(sp, ((0,), (1, 2), (3,)))


def test_certify_p3_classes():
    sp, part = space_and_partition(generate("path", 3), ChainParams("independent_set"))
    empty = certify_cartesian_product(sp, part, ())
    assert empty.ok
    assert empty.space_a.n_states == 2 and empty.space_b.n_states == 2
    one = certify_cartesian_product(sp, part, (1,))
    assert one.ok
    assert one.space_a.n_states == 1 and one.space_b.n_states == 1
    assert one.factor_a.graph.n == 0  # both neighbors of the trace removed


def test_certify_all_product_kinds():
    cases = [
        (generate("path", 6), ChainParams("independent_set", lam=2.0)),
        (generate("cycle", 5), ChainParams("independent_set", lam=0.5)),
        (generate("path", 5), ChainParams("q_coloring", q=3)),
        (generate("path", 4), ChainParams("partial_q_coloring", q=3, lam=2.0)),
        (generate("path", 6), ChainParams("b_matching")),
        (generate("cycle", 6), ChainParams("b_matching", lam=2.0)),
    ]
    for g, params in cases:
        sp, part = space_and_partition(g, params)
        for t in part.traces:
            cert = certify_cartesian_product(sp, part, t)
            assert cert.ok, (params.kind, t, cert.witness)


def test_naive_certification_fails_with_witness():
    g = generate("cycle", 4)
    sp, part = space_and_partition(g, ChainParams("b_edge_cover"))
    cert = certify_cartesian_product(sp, part, part.traces[0])
    assert not cert.ok and cert.witness is not None


def test_interclass_degree_at_most_one_hardcore():
    # no state has two moves into the same other class
    for fam, n in [("path", 6), ("cycle", 6)]:
        sp, part = space_and_partition(generate(fam, n), ChainParams("independent_set"))
        for (ta, tb), edges in part.inter_edges.items():
            seen = {}
            for i, j in edges:
                for s, other in ((i, tb), (j, ta)):
                    assert (s, other) not in seen
                    seen[(s, other)] = True


def test_trace_order_p3():
    sp, part = space_and_partition(generate("path", 3), ChainParams("independent_set"))
    order = build_trace_order(part)
    assert order.ok
    assert order.maximal == ()
    assert order.parents[(1,)] == [()]
    assert hierarchical_route(order, (1,), ()) == [(1,), ()]


def test_trace_order_monotone_sizes_and_matchings():
    cases = [
        (generate("path", 7), ChainParams("independent_set", lam=2.0)),
        (generate("cycle", 6), ChainParams("independent_set")),
        (generate("path", 4), ChainParams("partial_q_coloring", q=2)),
        (generate("path", 6), ChainParams("b_matching")),
        (generate("cycle", 4), ChainParams("b_edge_cover")),
        (generate("path", 6), ChainParams("csds")),
    ]
    for g, params in cases:
        sp, part = space_and_partition(g, params)
        order = build_trace_order(part)
        assert order.ok, (params.kind, order.failures)
        # parent-child boundaries are perfect matchings onto the child
        for child, parents in order.parents.items():
            for parent in parents:
                key = (min(parent, child), max(parent, child))
                assert len(part.inter_edges[key]) == len(part.members[child])


def test_order_rejected_for_unordered_kind():
    sp, part = space_and_partition(generate("path", 4), ChainParams("q_coloring", q=4))
    with pytest.raises(ConfigurationError):
        build_trace_order(part)


def test_csds_subclasses_p3():
    g = generate("path", 3)
    sp, part = space_and_partition(g, ChainParams("csds"))
    assert set(part.traces) == {(), (1,)}
    u = undominated_separator_vertices(g, part.x, ())
    assert u == {1}
    cover = subclass_decompose(sp, part, ())
    assert set(cover.labels) == {(), (1,)}
    both = set(cover.members[()]) & set(cover.members[(1,)])
    assert both == {sp.index[0b101]}  # 0 and 2 both selected
    assert cover.ok


def test_bec_subclasses_triangle():
    g = generate("cycle", 3)
    sp, part = space_and_partition(g, ChainParams("b_edge_cover"))
    assert sp.n_states == 4
    cover = subclass_decompose(sp, part, part.traces[0])
    assert cover.ok
    union = set()
    for lab in cover.labels:
        union.update(cover.members[lab])
    assert union == set(range(sp.n_states))


def test_bec_subclass_ratio_bound():
    for g in (generate("cycle", 4), generate("cycle", 5)):
        sp, part = space_and_partition(g, ChainParams("b_edge_cover"))
        bmax = max(g.b(v) for v in range(g.n))
        for t in part.traces:
            cover = subclass_decompose(sp, part, t)
            assert cover.ok
            bound = 2 ** (bmax * len(part.x))
            for lab in cover.labels:
                assert len(part.members[t]) <= bound * len(cover.members[lab])


def test_csds_subclass_ratio_bound():
    for g in (generate("path", 5), generate("cycle", 5)):
        sp, part = space_and_partition(g, ChainParams("csds"))
        for t in part.traces:
            u = undominated_separator_vertices(g, part.x, t)
            cover = subclass_decompose(sp, part, t)
            assert cover.ok
            assert cover.multiplicity_max <= 2 ** len(u)
            for lab in cover.labels:
                assert len(part.members[t]) <= 2 ** len(u) * len(cover.members[lab])


def test_mis_subclasses_p5():
    g = generate("path", 5)
    sp, part = space_and_partition(g, ChainParams("maximal_independent_set"))
    assert sp.n_states == 4
    cover = subclass_decompose(sp, part, ())
    assert set(cover.labels) == {(1,), (3,), (1, 3)}
    assert cover.ok


def test_mbm_subclasses_partition_class():
    g = generate("path", 5)
    sp, part = space_and_partition(g, ChainParams("maximal_b_matching"))
    for t in part.traces:
        cover = subclass_decompose(sp, part, t)
        assert cover.ok
        assert cover.multiplicity_max == 1  # boundary labels are disjoint
        total = sum(len(m) for m in cover.members.values())
        assert total == len(part.members[t])


def test_subclass_union_equals_class_everywhere():
    cases = [
        (generate("cycle", 5), ChainParams("b_edge_cover", lam=2.0)),
        (generate("cycle", 5), ChainParams("csds", lam=0.5)),
        (generate("cycle", 6), ChainParams("maximal_independent_set")),
        (generate("cycle", 6), ChainParams("maximal_b_matching")),
    ]
    for g, params in cases:
        sp, part = space_and_partition(g, params)
        for t in part.traces:
            cover = subclass_decompose(sp, part, t)
            assert cover.ok, (params.kind, t)
            union = set()
            for lab in cover.labels:
                union.update(cover.members[lab])
            assert union == set(part.members[t])


def test_beta_caps_enforced():
    # hub must keep 5 of its 6 edges; residual quota 5 exceeds the beta cap
    star = make_graph(7, [(0, i) for i in range(1, 7)], b_values=(5, 0, 0, 0, 0, 0, 0))
    sp = build_state_space(star, ChainParams("b_edge_cover"))
    assert sp.n_states == 7
    part = partition_by_trace(sp, build_separator_tree(star))
    assert part.x == (0,)
    with pytest.raises(ConfigurationError):
        subclass_decompose(sp, part, part.traces[0])


def test_condition_report_variants():
    sp, part = space_and_partition(generate("path", 5), ChainParams("independent_set"))
    rep = verify_framework_conditions(sp, part, "nonhier")
    assert rep.ok
    rep = verify_framework_conditions(sp, part, "hier")
    assert rep.ok
    sp2, part2 = space_and_partition(generate("path", 5), ChainParams("csds"))
    rep2 = verify_framework_conditions(sp2, part2, "relaxed_hier")
    assert rep2.ok
    with pytest.raises(ValueError):
        verify_framework_conditions(sp, part, "bogus")


def test_class_size_ratio_bound_bounded_degree():
    # ratio of any two hardcore class sizes is at most 2^(|X| * Delta)
    for fam, n in [("path", 7), ("cycle", 7)]:
        g = generate(fam, n)
        sp, part = space_and_partition(g, ChainParams("independent_set"))
        sizes = [len(part.members[t]) for t in part.traces]
        assert max(sizes) <= 2 ** (len(part.x) * g.max_degree) * min(sizes)


def test_weight_identities_at_lam_two():
    g = generate("path", 5)
    sp, part = space_and_partition(g, ChainParams("independent_set", lam=2.0))
    for t in part.traces:
        cert = certify_cartesian_product(sp, part, t)
        assert weight_factorization_residual(sp, cert) < 1e-12
