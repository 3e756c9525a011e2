"""Experiment orchestration: config-driven pipeline runs with CSV reports.

A run executes build space -> partition -> certify -> flows -> bounds ->
mixing oracles -> simulation, degrading per stage when a cap is hit; every
skipped check is named in the report, never silently dropped.  Outputs are
byte-reproducible for a fixed config and seed (wall-clock lives only in the
human-readable summary, not the CSV).
"""

from __future__ import annotations

import csv
import io
import math
import os
import time
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from . import chains
from .bounds import build_bound_report
from .chains import ChainParams, ConfigurationError
from .decomposition import build_separator_tree, compute_decomposition, decomposition_width
from .flow import FlowBuildError, SpaceFlow, build_flow, reweight_flow
from .graphs import Graph, generate, load_graph, with_annotations
from .partition import build_trace_order, partition_by_trace, verify_framework_conditions
from .simulate import geometric_checkpoints, occupation_tv, simulate_chain
from .statespace import (
    StateCapExceeded,
    build_state_space,
    check_connectivity,
    detailed_balance_residual,
    exact_conductance,
    exact_expansion,
    exact_mixing_time,
    exact_stationary,
)

MODES = ("exact", "simulate", "flow", "full")

CSV_SCHEMA_VERSION = "glauberflow-report-1"

CSV_COLUMNS = [
    "instance", "chain", "lam", "q", "b", "family", "n", "m", "seed",
    "omega", "connected", "delta_m", "normalizer", "treewidth_bound",
    "num_classes", "e_min", "tau_quarter",
    "expansion_exact", "conductance_exact",
    "rho_uniform", "rho_kernel", "rho_transition",
    "expansion_lb", "conductance_lb",
    "db_residual", "stationary_residual",
    "cert_ok", "order_ok", "conservation_ok",
    "sandwich_expansion_ok", "sandwich_conductance_ok", "bounds_ok",
    "sim_steps", "sim_tv", "skipped",
]


@dataclass
class ExperimentConfig:
    graph: Optional[str] = None          # path to an edge-list file
    family: Optional[str] = None         # or a generator family
    n: int = 0
    k: int = 1
    graph_seed: int = 0
    chain: str = chains.KIND_IS
    lam: float = 1.0
    q: int = 3
    b: Optional[int] = None
    mode: str = "exact"
    steps: int = 100_000
    replicas: int = 0
    seed: int = 0
    out: Optional[str] = None
    cap_states: int = 200_000
    cap_exact: int = 2_000
    cap_cut: int = 18
    label: Optional[str] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.cap_states <= 0 or self.cap_exact <= 0:
            raise ConfigurationError("caps must be positive")
        if self.graph is None and self.family is None:
            raise ConfigurationError("config needs either a graph path or a generator family")


def parse_config(text: str) -> ExperimentConfig:
    """Plain-text config: one 'key value' pair per line, '#' comments."""
    values: dict = {}
    casts = {f.name: f.type for f in fields(ExperimentConfig)}
    int_keys = {"n", "k", "graph_seed", "steps", "replicas", "seed",
                "cap_states", "cap_exact", "cap_cut", "q", "b"}
    float_keys = {"lam"}
    aliases = {"lambda": "lam", "graph-seed": "graph_seed", "cap-states": "cap_states",
               "cap-exact": "cap_exact", "cap-cut": "cap_cut"}
    for raw in text.split("\n"):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise ConfigurationError(f"malformed config line {raw!r}")
        key, val = parts[0], parts[1].strip()
        key = aliases.get(key, key)
        if key not in casts:
            raise ConfigurationError(f"unknown config key {key!r}")
        if key in int_keys:
            values[key] = int(val)
        elif key in float_keys:
            values[key] = float(val)
        else:
            values[key] = val
    return ExperimentConfig(**values)


def resolve_graph(cfg: ExperimentConfig) -> Graph:
    if cfg.graph is not None:
        g = load_graph(cfg.graph)
    else:
        g = generate(cfg.family, cfg.n, cfg.graph_seed, cfg.k)
    if cfg.b is not None and cfg.chain in chains.EDGE_SUBSET_KINDS:
        g = with_annotations(g, b_values=tuple(cfg.b for _ in range(g.n)))
    return g


@dataclass
class RunReport:
    rows: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    summary_lines: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def csv_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {CSV_SCHEMA_VERSION}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            writer.writerow(["" if row.get(c) is None else _fmt(row.get(c)) for c in CSV_COLUMNS])
        return buf.getvalue()

    def summary_text(self) -> str:
        return "\n".join(self.summary_lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    report = RunReport()
    t0 = time.monotonic()
    g = resolve_graph(cfg)
    params = ChainParams(cfg.chain, lam=cfg.lam, q=cfg.q)
    chains.validate_params(g, params)
    label = cfg.label or (cfg.graph or f"{cfg.family}{cfg.n}")
    row: dict = {
        "instance": label, "chain": cfg.chain, "lam": cfg.lam,
        "q": cfg.q if cfg.chain in chains.COLORING_KINDS else "",
        "b": cfg.b if cfg.chain in chains.EDGE_SUBSET_KINDS else "",
        "family": cfg.family or "", "n": g.n, "m": g.m, "seed": cfg.seed,
    }
    skipped: list[str] = []

    def fail(name: str, detail: str):
        report.failures.append(f"{label}: {name}: {detail}")

    td = compute_decomposition(g)
    row["treewidth_bound"] = decomposition_width(td)

    # simulation-only mode still tries to build the space for ground truth,
    # but a cap hit is only an error in the exact modes
    space = None
    try:
        space = build_state_space(g, params, cfg.cap_states)
    except StateCapExceeded:
        skipped.append("state space (cap_states exceeded)")
        if cfg.mode in ("exact", "flow", "full"):
            fail("build-space", f"more than {cfg.cap_states} states")

    if space is not None:
        row["omega"] = space.n_states
        row["delta_m"] = space.delta_m
        row["normalizer"] = space.normalizer
        connected, witness = check_connectivity(space)
        row["connected"] = connected
        if not connected:
            fail("connectivity", f"states {witness[0]!r} and {witness[1]!r} are not connected")
        else:
            pi = space.stationary()
            db = detailed_balance_residual(space)
            row["db_residual"] = db
            if db > 1e-12:
                fail("detailed-balance", f"residual {db}")
            resid = float(np.abs(pi @ space.transition - pi).max())
            row["stationary_residual"] = resid
            if resid > 1e-10:
                fail("stationary-fixed-point", f"residual {resid}")

        if connected and cfg.mode in ("exact", "full"):
            if space.n_states <= cfg.cap_exact:
                row["tau_quarter"] = exact_mixing_time(space, 0.25, cfg.cap_exact)
            else:
                skipped.append("exact mixing time (cap_exact exceeded)")
            if 1 < space.n_states <= cfg.cap_cut:
                row["expansion_exact"] = float(exact_expansion(space, cfg.cap_cut))
                row["conductance_exact"] = float(exact_conductance(space, cfg.cap_cut))
            else:
                skipped.append("exact expansion/conductance (cut cap exceeded)")

    flow_u = flow_w = None
    partition_data = None
    if space is not None and row.get("connected") and cfg.mode in ("flow", "full"):
        try:
            sep = build_separator_tree(g)
            partition_data = partition_by_trace(space, sep)
            row["num_classes"] = partition_data.num_classes
            e_min = min((len(e) for e in partition_data.inter_edges.values()), default=None)
            row["e_min"] = e_min
            flow_u = build_flow(space, mode="uniform")
            flow_w = reweight_flow(flow_u)
            row["rho_uniform"] = flow_u.stats["congestion_uniform"]
            row["rho_kernel"] = flow_w.stats["congestion_kernel"]
            row["rho_transition"] = flow_w.stats["congestion_transition"]
            row["cert_ok"] = True
            if params.kind in (chains.KIND_IS, chains.KIND_PCOL, chains.KIND_BM,
                               chains.KIND_BEC, chains.KIND_CSDS):
                order = build_trace_order(partition_data)
                row["order_ok"] = order.ok
                if not order.ok:
                    fail("trace-order", "; ".join(order.failures[:2]))
            if space.n_states <= 400:
                flow_u.check_conservation(1e-9)
                flow_w.check_conservation(1e-9)
                row["conservation_ok"] = True
            else:
                skipped.append("per-commodity conservation (space above 400 states)")
        except (FlowBuildError, ConfigurationError) as e:
            row["cert_ok"] = False
            fail("flow-construction", str(e))

        if flow_u is not None:
            rho_u = row.get("rho_uniform")
            if row.get("expansion_exact") is not None and rho_u:
                ok = row["expansion_exact"] >= 1.0 / (2.0 * rho_u) - 1e-9
                row["sandwich_expansion_ok"] = ok
                if not ok:
                    fail("expansion-sandwich", f"h = {row['expansion_exact']} < 1/(2*{rho_u})")
            rho_t = row.get("rho_transition")
            if row.get("conductance_exact") is not None and rho_t:
                ok = row["conductance_exact"] >= 1.0 / (2.0 * rho_t) - 1e-9
                row["sandwich_conductance_ok"] = ok
                if not ok:
                    fail("conductance-sandwich", f"phi = {row['conductance_exact']} < 1/(2*{rho_t})")
            row["expansion_lb"] = 1.0 / (2.0 * rho_u) if rho_u else None
            row["conductance_lb"] = 1.0 / (2.0 * rho_t) if row.get("rho_transition") else None
            breport = build_bound_report(
                space, row["treewidth_bound"], flow_u, flow_w, partition_data,
                row.get("tau_quarter"), row.get("expansion_exact"), row.get("conductance_exact"),
            )
            row["bounds_ok"] = not breport.violations
            for v in breport.violations:
                fail("bound-consistency", v)

    if cfg.mode in ("simulate", "full") and cfg.steps > 0:
        delta_m = space.delta_m if (space is not None and params.kind in chains.MAXIMAL_KINDS) else None
        final, counts = simulate_chain(
            g, params, cfg.steps, cfg.seed, delta_m=delta_m,
            collect_counts=space is not None, validate_every=max(cfg.steps // 100, 1),
        )
        row["sim_steps"] = cfg.steps
        if not chains.is_valid_state(g, params, final):
            fail("simulation-validity", f"final state {final!r} invalid")
        if space is not None and row.get("connected"):
            row["sim_tv"] = occupation_tv(space, counts)
        else:
            skipped.append("simulation TV vs exact law (no state space)")

    row["skipped"] = "; ".join(skipped)
    report.rows.append(row)
    report.skipped.extend(f"{label}: {s}" for s in skipped)

    elapsed = time.monotonic() - t0
    report.summary_lines.append(f"instance {label}: chain={cfg.chain} lam={cfg.lam} mode={cfg.mode}")
    for key in CSV_COLUMNS:
        if row.get(key) not in (None, ""):
            report.summary_lines.append(f"  {key} = {_fmt(row[key])}")
    for s in skipped:
        report.summary_lines.append(f"  skipped: {s}")
    for f_ in report.failures:
        report.summary_lines.append(f"  FAILED: {f_}")
    report.summary_lines.append(f"  wall_clock_s = {elapsed:.3f}")
    return report


def write_report(report: RunReport, out_dir: str, name: str = "report") -> tuple[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{name}.csv")
    txt_path = os.path.join(out_dir, f"{name}.txt")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(report.csv_text())
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write(report.summary_text())
    return csv_path, txt_path
