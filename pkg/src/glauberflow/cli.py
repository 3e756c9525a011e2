"""Command-line entry points.

Subcommands mirror the pipeline stages: build-space, partition, certify,
flow, bounds, mix-exact, simulate, tv-curve, and config-driven run.  All
outputs are plain text or CSV; a fixed seed reproduces outputs byte for
byte.
"""

from __future__ import annotations

import argparse
import sys

from . import chains
from .bounds import build_bound_report
from .chains import ChainParams
from .decomposition import build_separator_tree, compute_decomposition, decomposition_width
from .experiment import ExperimentConfig, parse_config, run_experiment, write_report
from .flow import build_flow, congestion, reweight_flow
from .graphs import generate, load_graph, with_annotations
from .partition import (
    build_trace_order,
    certify_cartesian_product,
    format_partition_report,
    partition_by_trace,
    subclass_decompose,
    verify_framework_conditions,
)
from .simulate import empirical_tv, geometric_checkpoints, occupation_tv, simulate_chain
from .statespace import (
    build_state_space,
    check_connectivity,
    dump_space,
    exact_conductance,
    exact_expansion,
    exact_mixing_time,
)


def _add_instance_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", help="edge-list file; alternative to --family")
    p.add_argument("--family", choices=("path", "cycle", "complete", "random_tree", "partial_k_tree", "grid"))
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--k", type=int, default=1, help="width parameter for partial_k_tree")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chain", default=chains.KIND_IS, choices=chains.KINDS)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--q", type=int, default=3)
    p.add_argument("--b", type=int, default=None)
    p.add_argument("--cap-states", type=int, default=200_000)
    p.add_argument("--cap-exact", type=int, default=2_000)
    p.add_argument("--out", default=None)


def _instance(args) -> tuple:
    cfg = ExperimentConfig(
        graph=args.graph, family=args.family, n=args.n, k=args.k,
        graph_seed=args.seed, chain=args.chain, lam=args.lam, q=args.q, b=args.b,
        cap_states=getattr(args, "cap_states", 200_000),
        cap_exact=getattr(args, "cap_exact", 2_000),
        seed=args.seed,
    )
    from .experiment import resolve_graph

    g = resolve_graph(cfg)
    params = ChainParams(args.chain, lam=args.lam, q=args.q)
    return g, params, cfg


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="glauberflow")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-space", help="enumerate states and dump the move graph")
    _add_instance_args(p)

    p = sub.add_parser("partition", help="separator-trace classes of the state space")
    _add_instance_args(p)
    p.add_argument("--variant", default="nonhier",
                   choices=("nonhier", "hier", "relaxed_hier", "relaxed_nonhier"))

    p = sub.add_parser("certify", help="Cartesian-product certificates per class")
    _add_instance_args(p)

    p = sub.add_parser("flow", help="build recursive flows and report congestion")
    _add_instance_args(p)

    p = sub.add_parser("bounds", help="measured congestion against every closed-form bound")
    _add_instance_args(p)

    p = sub.add_parser("mix-exact", help="exact mixing time by matrix powers")
    _add_instance_args(p)
    p.add_argument("--epsilon", type=float, default=0.25)

    p = sub.add_parser("simulate", help="long-run single-chain simulation")
    _add_instance_args(p)
    p.add_argument("--steps", type=int, default=100_000)

    p = sub.add_parser("tv-curve", help="cross-replica TV against the exact law")
    _add_instance_args(p)
    p.add_argument("--steps", type=int, default=256, help="largest checkpoint")
    p.add_argument("--replicas", type=int, default=10_000)

    p = sub.add_parser("run", help="config-driven pipeline run")
    p.add_argument("config", help="plain-text key-value config file")
    p.add_argument("--out", default=None)

    args = ap.parse_args(argv)

    if args.command == "run":
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
        if args.out:
            cfg.out = args.out
        report = run_experiment(cfg)
        if cfg.out:
            csv_path, txt_path = write_report(report, cfg.out)
            sys.stdout.write(report.summary_text())
            sys.stdout.write(f"wrote {csv_path} and {txt_path}\n")
        else:
            sys.stdout.write(report.csv_text())
            sys.stdout.write(report.summary_text())
        return 0 if report.ok else 1

    g, params, cfg = _instance(args)

    if args.command == "build-space":
        space = build_state_space(g, params, cfg.cap_states)
        _emit(dump_space(space) + "\n", args.out)
        return 0

    space = build_state_space(g, params, cfg.cap_states)

    if args.command == "partition":
        part = partition_by_trace(space, build_separator_tree(g))
        order = None
        if args.variant in ("hier", "relaxed_hier"):
            order = build_trace_order(part)
        covers = None
        if args.variant in ("relaxed_hier", "relaxed_nonhier"):
            covers = {t: subclass_decompose(space, part, t) for t in part.traces}
        rep = verify_framework_conditions(space, part, args.variant, order, covers)
        _emit(format_partition_report(part, rep), args.out)
        return 0 if rep.ok else 1

    if args.command == "certify":
        part = partition_by_trace(space, build_separator_tree(g))
        lines = []
        all_ok = True
        for t in part.traces:
            if params.kind in ("b_edge_cover", "csds", "maximal_independent_set", "maximal_b_matching"):
                cover = subclass_decompose(space, part, t)
                all_ok &= cover.ok
                lines.append(f"class {t!r}: {len(cover.labels)} subclasses, certified={cover.ok}")
                for lab in cover.labels:
                    c = cover.certificates[lab]
                    lines.append(f"  subclass {lab!r}: {len(cover.members[lab])} states "
                                 f"= {c.space_a.n_states} x {c.space_b.n_states}, ok={c.ok}")
            else:
                c = certify_cartesian_product(space, part, t)
                all_ok &= c.ok
                lines.append(f"class {t!r}: {len(part.members[t])} states "
                             f"= {c.space_a.n_states} x {c.space_b.n_states}, ok={c.ok}"
                             + (f" ({c.witness})" if c.witness else ""))
        _emit("\n".join(lines) + "\n", args.out)
        return 0 if all_ok else 1

    if args.command == "flow":
        fl = build_flow(space, mode="uniform")
        fw = reweight_flow(fl)
        lines = [
            f"variant = {fl.variant}",
            f"rho_uniform = {congestion(fl)}",
            f"rho_kernel = {fw.stats['congestion_kernel']}",
            f"rho_transition = {fw.stats['congestion_transition']}",
            f"expansion_lb = {1.0 / (2.0 * congestion(fl))}",
            f"conductance_lb = {1.0 / (2.0 * fw.stats['congestion_transition'])}",
        ]
        _emit("\n".join(lines) + "\n", args.out)
        return 0

    if args.command == "bounds":
        td = compute_decomposition(g)
        part = partition_by_trace(space, build_separator_tree(g))
        fl = build_flow(space, mode="uniform")
        fw = reweight_flow(fl)
        tau = exact_mixing_time(space, 0.25, cfg.cap_exact) if space.n_states <= cfg.cap_exact else None
        h = exact_expansion(space) if 1 < space.n_states <= 18 else None
        phi = exact_conductance(space) if 1 < space.n_states <= 18 else None
        rep = build_bound_report(space, decomposition_width(td), fl, fw, part, tau, h, phi)
        _emit(rep.format_text(), args.out)
        return 0 if not rep.violations else 1

    if args.command == "mix-exact":
        tau = exact_mixing_time(space, args.epsilon, cfg.cap_exact)
        _emit(f"tau({args.epsilon}) = {tau}\n", args.out)
        return 0

    if args.command == "simulate":
        delta_m = space.delta_m if params.kind in chains.MAXIMAL_KINDS else None
        final, counts = simulate_chain(g, params, args.steps, args.seed,
                                       delta_m=delta_m, collect_counts=True)
        tv = occupation_tv(space, counts)
        ok, _ = check_connectivity(space)
        _emit(f"steps = {args.steps}\nfinal_state = {final!r}\n"
              f"occupation_tv = {tv}\nconnected = {ok}\n", args.out)
        return 0

    if args.command == "tv-curve":
        cps = geometric_checkpoints(args.steps)
        curve = empirical_tv(g, params, args.replicas, cps, args.seed, space)
        lines = ["t,tv"] + [f"{t},{tv!r}" for t, tv in curve]
        _emit("\n".join(lines) + "\n", args.out)
        return 0

    raise AssertionError(args.command)


if __name__ == "__main__":
    sys.exit(main())
