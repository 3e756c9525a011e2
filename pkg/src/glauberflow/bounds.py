"""Closed-form congestion/expansion/conductance/mixing bound calculators.

Every bound is evaluated with all hidden constants set to one and logarithms
base two, and is treated strictly as a one-sided check: measured mixing times
must not exceed it.  The per-chain polynomial forms reach astronomical
magnitudes even at desk scale, so bounds are carried as log2 values (with a
linear value alongside whenever it fits in a float).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from . import chains
from .chains import ChainParams
from .partition import ORDERED_KINDS
from .graphs import Graph
from .statespace import StateSpace

LOG2_MAX_FLOAT = 1023.0


def lam_hat(lam: float) -> float:
    """max(lambda, 1/lambda), the bias magnitude entering the closed forms."""
    return max(lam, 1.0 / lam)


def _lin(log2_value: float) -> Optional[float]:
    if log2_value <= LOG2_MAX_FLOAT:
        return 2.0 ** log2_value
    return None


@dataclass
class EvaluatedBound:
    name: str
    log2_value: float
    params: dict

    @property
    def value(self) -> Optional[float]:
        return _lin(self.log2_value)


def expansion_lower_bound(rho_uniform: float) -> float:
    """h >= 1/(2 rho) for any flow with unit pair demands."""
    return 1.0 / (2.0 * rho_uniform)


def conductance_lower_bound(rho_weighted: float) -> float:
    """phi >= 1/(2 rho) for stationary-product demands measured against Q."""
    return 1.0 / (2.0 * rho_weighted)


def expansion_mixing_bound(delta: float, h: float, n_states: int, epsilon: float = 0.25) -> EvaluatedBound:
    """Mixing bound for the lazy 1/(2 Delta) walk from an expansion bound."""
    val = (delta ** 2 / h ** 2) * math.log(max(n_states, 2) / epsilon)
    return EvaluatedBound(
        "expansion_mixing",
        math.log2(val),
        {"delta": delta, "h": h, "N": n_states, "epsilon": epsilon},
    )


def conductance_mixing_bound(phi: float, pi_min: float, epsilon: float = 0.25) -> EvaluatedBound:
    """tau(eps) <= phi^-2 * ln(1/(pi_min * eps)) for reversible lazy chains."""
    val = (1.0 / phi ** 2) * math.log(1.0 / (pi_min * epsilon))
    return EvaluatedBound(
        "conductance_mixing",
        math.log2(val),
        {"phi": phi, "pi_min": pi_min, "epsilon": epsilon},
    )


def nonhier_mixing_bound(n_states: int, e_min: int, n: int, delta: float) -> EvaluatedBound:
    """((2N/E_min) + 1)^(2 log n) * delta^2 * log N."""
    n_eff = max(n, 2)
    log2_val = (
        2 * math.log2(n_eff) * math.log2(2 * n_states / e_min + 1)
        + 2 * math.log2(delta)
        + math.log2(max(math.log2(max(n_states, 2)), 1e-9))
    )
    return EvaluatedBound(
        "nonhier_recursive",
        log2_val,
        {"N": n_states, "E_min": e_min, "n": n, "delta": delta},
    )


def hier_mixing_bound(k: int, n_states: int, n: int, delta: float,
                      lam: float = 1.0, sep_size: int = 0) -> EvaluatedBound:
    """(2K+1)^(2 log n) * delta^2 * log N, with K inflated by the bias.

    For biased chains the class masses differ by up to lam_hat^|X| across a
    parent-child step, so K is weighted accordingly before entering the
    exponent.
    """
    n_eff = max(n, 2)
    k_eff = k * lam_hat(lam) ** sep_size
    log2_val = (
        2 * math.log2(n_eff) * math.log2(2 * k_eff + 1)
        + 2 * math.log2(delta)
        + math.log2(max(math.log2(max(n_states, 2)), 1e-9))
    )
    return EvaluatedBound(
        "hier_recursive",
        log2_val,
        {"K": k, "K_eff": k_eff, "N": n_states, "n": n, "delta": delta, "lam": lam},
    )


def chain_polynomial_bound(g: Graph, params: ChainParams, treewidth: int) -> EvaluatedBound:
    """The per-chain closed-form mixing bound, constants one, logs base two."""
    kind = params.kind
    lam = params.lam
    lh = lam_hat(lam)
    t = treewidth
    n = max(g.n, 2)
    m = max(g.m, 1)
    d = max(g.max_degree, 1)
    q = params.q
    b = max((g.b(v) for v in range(g.n)), default=1) if kind in chains.EDGE_SUBSET_KINDS else 1
    ln = math.log2(n)
    llh = math.log2(lh)

    if kind == chains.KIND_IS:
        log2_val = (
            2 * math.log2((1 + lh) * lh)
            + math.log2(1 + llh)
            + (2 * (t + 2) * (1 + llh) + 5) * ln
        )
    elif kind == chains.KIND_COL:
        log2_val = (
            2 * math.log2(max(q - 1, 1))
            + math.log2(max(math.log2(q), 1e-9))
            + (4 * (t + 1) * d * math.log2(q) + 7) * ln
        )
    elif kind == chains.KIND_PCOL:
        log2_val = (
            2 * math.log2(q)
            + math.log2(math.log2(q + 1))
            + (2 * (t + 2) * math.log2(q + 1) + 5) * ln
        )
    elif kind == chains.KIND_BEC:
        expo = 2 * (
            3
            + math.log2(1 + lam)
            - math.log2(lam)
            + (t + 1) * math.log2(b + 1)
            + ((t + 1) * (b + t / 2) + 1) * (1 + llh)
        ) / math.log2(6 / 5)
        log2_val = (
            2 * 36 * (t + 1) ** 2 * math.log2(2 * lh)
            + 2 * (math.log2(lh) - math.log2(1 + lh))
            + 3 * math.log2(m)
            + math.log2(1 + llh)
            + expo * ln
        )
    elif kind == chains.KIND_CSDS:
        expo = 2 * (
            2 + math.log2((1 + lam) / lam) + (t + 2) * (3 + llh)
        ) / math.log2(6 / 5) + 3
        log2_val = (
            12 * (t + 1) * math.log2(2 * lh)
            + 2 * (math.log2(lh) - math.log2(1 + lh))
            + math.log2(1 + llh)
            + expo * ln
        )
    elif kind == chains.KIND_BM:
        log2_val = (
            2 * math.log2((1 + lh) * lh)
            + math.log2(1 + llh)
            + 3 * math.log2(m)
            + (2 * d * (t + 2) * (1 + llh) + 2) * ln
        )
    elif kind == chains.KIND_MIS:
        log2_val = 6 * d * d + (2 * (t + 1) * (7 * d ** 6 + d + 1) + 7) * ln
    elif kind == chains.KIND_MBM:
        log2_val = 12 * d * d + 3 * math.log2(m) + (2 * (t + 1) * (8 * d ** 7 + 3 * d * d) + 4) * ln
    else:
        raise AssertionError(kind)

    return EvaluatedBound(
        f"{kind}_polynomial",
        log2_val,
        {"t": t, "n": g.n, "m": g.m, "Delta": g.max_degree, "q": q, "b": b,
         "lam": lam, "lam_hat": lh},
    )


@dataclass
class BoundReport:
    """Measured congestion figures and every applicable evaluated bound."""

    kind: str
    lam: float
    n_states: int
    delta_m: int
    normalizer: float
    structure: dict = field(default_factory=dict)
    rho_uniform: Optional[float] = None
    rho_kernel: Optional[float] = None
    rho_transition: Optional[float] = None
    expansion_lb: Optional[float] = None
    conductance_lb: Optional[float] = None
    expansion_exact: Optional[float] = None
    conductance_exact: Optional[float] = None
    tau_quarter: Optional[int] = None
    bounds: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    def check_consistency(self) -> None:
        """Record any bound the measured mixing time exceeds (must be none)."""
        self.violations = []
        if self.tau_quarter is None:
            return
        log_tau = math.log2(max(self.tau_quarter, 1))
        for eb in self.bounds:
            if log_tau > eb.log2_value:
                self.violations.append(
                    f"tau(1/4) = {self.tau_quarter} exceeds {eb.name} "
                    f"(log2 bound {eb.log2_value:.2f})"
                )

    def as_items(self) -> list[tuple[str, object]]:
        items = [
            ("kind", self.kind),
            ("lam", self.lam),
            ("states", self.n_states),
            ("delta_m", self.delta_m),
            ("normalizer", self.normalizer),
            ("rho_uniform", self.rho_uniform),
            ("rho_kernel", self.rho_kernel),
            ("rho_transition", self.rho_transition),
            ("expansion_lb", self.expansion_lb),
            ("conductance_lb", self.conductance_lb),
            ("expansion_exact", self.expansion_exact),
            ("conductance_exact", self.conductance_exact),
            ("tau_quarter", self.tau_quarter),
        ]
        for k in sorted(self.structure):
            items.append((f"param_{k}", self.structure[k]))
        for eb in self.bounds:
            items.append((f"log2_bound_{eb.name}", round(eb.log2_value, 6)))
        items.append(("bound_violations", len(self.violations)))
        return items

    def format_text(self) -> str:
        lines = [f"{k} = {v}" for k, v in self.as_items()]
        lines.extend(f"VIOLATION: {v}" for v in self.violations)
        return "\n".join(lines) + "\n"


def build_bound_report(
    space: StateSpace,
    treewidth: int,
    flow_uniform=None,
    flow_weighted=None,
    partition=None,
    tau_quarter: Optional[int] = None,
    expansion_exact=None,
    conductance_exact=None,
    epsilon: float = 0.25,
) -> BoundReport:
    """Assemble measured quantities and every applicable closed-form bound."""
    g = space.graph
    params = space.params
    report = BoundReport(
        kind=params.kind,
        lam=params.lam,
        n_states=space.n_states,
        delta_m=space.delta_m,
        normalizer=space.normalizer,
        tau_quarter=tau_quarter,
    )
    report.structure = {
        "n": g.n,
        "m": g.m,
        "Delta": g.max_degree,
        "t": treewidth,
    }
    if partition is not None:
        report.structure["K"] = partition.num_classes
        e_min = min((len(e) for e in partition.inter_edges.values()), default=None)
        report.structure["E_min"] = e_min
        report.structure["sep_size"] = len(partition.x)

    if flow_uniform is not None:
        report.rho_uniform = flow_uniform.stats["congestion_uniform"]
        if report.rho_uniform:
            report.expansion_lb = expansion_lower_bound(report.rho_uniform)
    if flow_weighted is not None:
        report.rho_kernel = flow_weighted.stats["congestion_kernel"]
        report.rho_transition = flow_weighted.stats["congestion_transition"]
        if report.rho_transition:
            report.conductance_lb = conductance_lower_bound(report.rho_transition)
    if expansion_exact is not None:
        report.expansion_exact = float(expansion_exact)
    if conductance_exact is not None:
        report.conductance_exact = float(conductance_exact)

    uniform_chain = params.kind in chains.UNIFORM_KINDS or params.lam == 1.0
    delta_for_expansion = space.delta_m if params.kind in chains.MAXIMAL_KINDS else space.normalizer
    h_candidates = [h for h in (report.expansion_exact, report.expansion_lb) if h]
    if uniform_chain and h_candidates and space.n_states > 1:
        report.bounds.append(
            expansion_mixing_bound(delta_for_expansion, max(h_candidates), space.n_states, epsilon)
        )
    phi_candidates = [p for p in (report.conductance_exact, report.conductance_lb) if p]
    if phi_candidates and space.n_states > 1:
        pi_min = float(space.stationary().min())
        report.bounds.append(
            conductance_mixing_bound(max(phi_candidates), pi_min, epsilon)
        )

    if partition is not None and space.n_states > 1:
        e_min = report.structure.get("E_min")
        if e_min:
            report.bounds.append(
                nonhier_mixing_bound(space.n_states, e_min, g.n, space.normalizer)
            )
        if params.kind in ORDERED_KINDS:
            report.bounds.append(
                hier_mixing_bound(
                    partition.num_classes, space.n_states, g.n, space.normalizer,
                    params.lam, len(partition.x),
                )
            )

    if space.n_states > 1:
        report.bounds.append(chain_polynomial_bound(g, params, treewidth))
    report.check_consistency()
    return report


def format_report_csv_row(report: BoundReport) -> tuple[list[str], list[str]]:
    items = report.as_items()
    header = [k for k, _ in items]
    row = ["" if v is None else str(v) for _, v in items]
    return header, row
