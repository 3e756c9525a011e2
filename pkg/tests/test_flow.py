import math

import numpy as np
import pytest

from glauberflow.chains import ChainParams
from glauberflow.decomposition import build_separator_tree
from glauberflow.flow import (
    UNIFORM,
    WEIGHTED,
    FlowBuildError,
    SpaceFlow,
    WeightedFactor,
    build_flow,
    build_flow_hier,
    build_flow_nonhier,
    build_flow_relaxed,
    congestion,
    measure_product_flow,
    product_factor_congestion,
    product_flow,
    reweight_flow,
)
from glauberflow.graphs import generate, make_graph, rng_stream
from glauberflow.partition import certify_cartesian_product, partition_by_trace
from glauberflow.statespace import (
    build_state_space,
    exact_conductance,
    exact_expansion,
    exact_mixing_time,
)


def test_single_edge_space_uniform_congestion():
    # two states, two ordered commodities: one unit per direction
    sp = build_state_space(generate("path", 1), ChainParams("independent_set"))
    fl = build_flow(sp, mode=UNIFORM)
    assert congestion(fl) == pytest.approx(1.0)


def test_conservation_all_variants_hardcore():
    g = generate("path", 6)
    sp = build_state_space(g, ChainParams("independent_set"))
    for variant in ("hier", "nonhier"):
        fl = build_flow(sp, variant, UNIFORM)
        fl.check_conservation(1e-9)
        fw = build_flow(sp, variant, WEIGHTED)
        fw.check_conservation(1e-9)


def test_conservation_relaxed_variants():
    cases = [
        (generate("path", 5), ChainParams("csds"), "relaxed_hier"),
        (generate("cycle", 4), ChainParams("b_edge_cover"), "relaxed_hier"),
        (generate("cycle", 6), ChainParams("maximal_independent_set"), "relaxed_nonhier"),
        (generate("cycle", 6), ChainParams("maximal_b_matching"), "relaxed_nonhier"),
    ]
    for g, params, variant in cases:
        sp = build_state_space(g, params)
        fl = build_flow(sp, variant, UNIFORM)
        fl.check_conservation(1e-9)
        assert fl.variant == variant


def test_reweighted_conservation_and_demands():
    g = generate("path", 5)
    sp = build_state_space(g, ChainParams("independent_set"))
    fl = build_flow_hier(sp)
    for lam in (0.5, 2.0):
        fw = reweight_flow(fl, lam)
        fw.check_conservation(1e-9)
        assert fw.space.params.lam == lam


def test_reweight_lam_one_matches_uniform_loads():
    g = generate("path", 5)
    sp = build_state_space(g, ChainParams("independent_set"))
    fl = build_flow_hier(sp, UNIFORM)
    fw = reweight_flow(fl)
    n = sp.n_states
    lu = fl._loads
    lw = fw._loads
    assert set(lu) == set(lw)
    for k in lu:
        assert lw[k] * n * n == pytest.approx(lu[k], rel=1e-9)


def test_expansion_sandwich_small_spaces():
    cases = [
        (generate("path", 2), ChainParams("independent_set")),
        (generate("path", 4), ChainParams("independent_set")),
        (generate("cycle", 3), ChainParams("b_edge_cover")),
        (generate("path", 3), ChainParams("csds")),
        (generate("path", 5), ChainParams("maximal_independent_set")),
        (generate("path", 2), ChainParams("q_coloring", q=3)),
    ]
    for g, params in cases:
        sp = build_state_space(g, params)
        if sp.n_states < 2:
            continue
        fl = build_flow(sp, mode=UNIFORM)
        fl.check_conservation(1e-9)
        rho = congestion(fl)
        h = float(exact_expansion(sp))
        assert h >= 1.0 / (2.0 * rho) - 1e-9, (params.kind, h, rho)


def test_conductance_sandwich_small_spaces():
    cases = [
        (generate("path", 4), ChainParams("independent_set", lam=0.5)),
        (generate("path", 4), ChainParams("independent_set", lam=2.0)),
        (generate("cycle", 3), ChainParams("b_edge_cover", lam=2.0)),
        (generate("path", 3), ChainParams("csds", lam=0.5)),
        (generate("path", 2), ChainParams("q_coloring", q=3)),
        (generate("path", 5), ChainParams("maximal_independent_set")),
    ]
    for g, params in cases:
        sp = build_state_space(g, params)
        fw = build_flow(sp, mode=WEIGHTED)
        fw.check_conservation(1e-9)
        rho = fw.stats["congestion_transition"]
        phi = float(exact_conductance(sp))
        assert phi >= 1.0 / (2.0 * rho) - 1e-9, (params.kind, phi, rho)


def test_product_flow_on_certified_class():
    g = generate("path", 6)
    sp = build_state_space(g, ChainParams("independent_set", lam=2.0))
    part = partition_by_trace(sp, build_separator_tree(g))
    fw = build_flow(sp, mode=WEIGHTED)
    for t in part.traces:
        if len(part.members[t]) < 2:
            continue
        cert = fw.certificates[t]
        cls = fw.class_flows[t]
        measured = measure_product_flow(cls)
        assert measured["kernel"] <= max(measured["factor_kernel"]) + 1e-9


def test_product_flow_constructor_asserts_bound():
    g = generate("path", 5)
    sp = build_state_space(g, ChainParams("independent_set"))
    part = partition_by_trace(sp, build_separator_tree(g))
    cert = certify_cartesian_product(sp, part, ())
    assert cert.ok
    fa = SpaceFlow(cert.space_a, WEIGHTED)
    fb = SpaceFlow(cert.space_b, WEIGHTED)
    flow = product_flow(cert, fa, fb, sp, WEIGHTED)
    assert flow.members == part.members[()]


def test_one_factor_trivial_gives_other_factor():
    # a single-state co-factor lifts the other factor's flow unchanged
    g = generate("path", 3)
    sp = build_state_space(g, ChainParams("independent_set"))
    part = partition_by_trace(sp, build_separator_tree(g))
    cert = certify_cartesian_product(sp, part, (1,))
    fa = SpaceFlow(cert.space_a, WEIGHTED)
    fb = SpaceFlow(cert.space_b, WEIGHTED)
    flow = product_flow(cert, fa, fb, sp, WEIGHTED)
    measured = measure_product_flow(flow)
    assert measured["kernel"] == 0.0  # single member, no commodities


def test_random_weighted_factor_pairs():
    for seed in range(10):
        h = _random_factor(seed, 12)
        j = _random_factor(seed + 1000, 9)
        stats = product_factor_congestion(h, j)
        assert stats["product"] <= max(stats["factors"]) + 1e-9


def _random_factor(seed, n):
    rng = rng_stream(seed, 0)
    edges = [(i - 1, i) for i in range(1, n)]
    extra = [(u, v) for u in range(n) for v in range(u + 2, n)]
    for e in extra:
        if rng.random() < 0.25:
            edges.append(e)
    pi = rng.random(n) + 0.1
    q = {e: float(rng.random() + 0.1) for e in edges}
    return WeightedFactor(n, edges, pi, q)


def test_flow_uses_only_space_edges():
    g = generate("cycle", 5)
    sp = build_state_space(g, ChainParams("csds"))
    fl = build_flow_relaxed(sp)
    edge_set = set(sp.edges)
    for (i, j), v in fl._loads.items():
        assert (min(i, j), max(i, j)) in edge_set
        assert v > -1e-12


def test_disconnected_space_rejected():
    # q = 3 on a triangle freezes every coloring: no flow can exist
    sp = build_state_space(generate("cycle", 3), ChainParams("q_coloring", q=3))
    with pytest.raises(FlowBuildError):
        build_flow_nonhier(sp)


def test_level_congestion_bounded_by_hier_factor():
    # per-level growth is at most 2 K_eff + 1 against the worst factor level
    for g, params in [
        (generate("path", 7), ChainParams("independent_set")),
        (generate("path", 7), ChainParams("independent_set", lam=2.0)),
        (generate("cycle", 6), ChainParams("independent_set", lam=0.5)),
    ]:
        sp = build_state_space(g, params)
        fw = build_flow_hier(sp, WEIGHTED)
        levels = fw.level_congestions()
        if 1 not in levels:
            continue
        lam_hat = max(params.lam, 1 / params.lam)
        k_eff = fw.partition.num_classes * lam_hat ** len(fw.partition.x)
        factor = 2 * k_eff + 1
        assert levels[0] <= factor * max(levels[1], 1.0) + 1e-9, (params, levels)


def test_mixing_time_against_flow_bounds():
    from glauberflow.bounds import build_bound_report
    from glauberflow.decomposition import compute_decomposition, decomposition_width

    for g, params in [
        (generate("path", 6), ChainParams("independent_set", lam=0.5)),
        (generate("path", 5), ChainParams("csds", lam=2.0)),
        (generate("cycle", 6), ChainParams("b_matching")),
    ]:
        sp = build_state_space(g, params)
        fl = build_flow(sp, mode=UNIFORM)
        fw = reweight_flow(fl)
        part = partition_by_trace(sp, build_separator_tree(g))
        tau = exact_mixing_time(sp)
        rep = build_bound_report(
            sp, decomposition_width(compute_decomposition(g)), fl, fw, part, tau,
        )
        assert not rep.violations, (params.kind, rep.violations)


def test_two_singleton_classes_route_over_the_boundary():
    # C6 with b = 2 edge covers: dropping any edge starves an endpoint,
    # except that the space still has a few states; use a crafted instance
    g = make_graph(2, [(0, 1)])
    sp = build_state_space(g, ChainParams("b_matching"))
    fl = build_flow(sp, mode=UNIFORM)
    fl.check_conservation(1e-9)
    assert congestion(fl) == pytest.approx(1.0)
