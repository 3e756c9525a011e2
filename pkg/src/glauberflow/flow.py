"""Multicommodity flows on state graphs, built by divide and conquer.

Every flow routes one unit between each ordered pair of states; demand
weights (uniform, or stationary-product for the biased chains) enter only
when loads are aggregated.  Class-internal flows come from lifting factor
flows through the certified product structure; flow between classes ascends
and descends the trace order (hierarchical variant), follows shortest class
paths with boundary spreading (non-hierarchical), or chains overlapping
subclasses (relaxed variants).  Congestion is measured, never assumed.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import chains, partition as part
from .chains import ChainParams
from .decomposition import build_separator_tree
from .graphs import Graph
from .partition import (
    CertificationError,
    ClassPartition,
    ProductCertificate,
    SubclassCover,
    TraceOrder,
    build_trace_order,
    certify_cartesian_product,
    hierarchical_route,
    partition_by_trace,
    subclass_decompose,
)
from .statespace import StateSpace, build_state_space

UNIFORM = "uniform"
WEIGHTED = "weighted"

VARIANTS = ("nonhier", "hier", "relaxed_hier", "relaxed_nonhier")

DEFAULT_VARIANT = {
    chains.KIND_IS: "hier",
    chains.KIND_COL: "nonhier",
    chains.KIND_PCOL: "hier",
    chains.KIND_BM: "hier",
    chains.KIND_BEC: "relaxed_hier",
    chains.KIND_CSDS: "relaxed_hier",
    chains.KIND_MIS: "relaxed_nonhier",
    chains.KIND_MBM: "relaxed_nonhier",
}

BASE_CASE_STATES = 4
PRODUCT_BOUND_TOL = 1e-9


class FlowBuildError(RuntimeError):
    pass


def _merge(dst: dict, src: dict, scale: float = 1.0) -> None:
    for k, v in src.items():
        dst[k] = dst.get(k, 0.0) + v * scale


def state_demands(space: StateSpace, mode: str) -> np.ndarray:
    """Per-state demand factor; pair (s, t) exchanges d[s] * d[t] units."""
    if mode == UNIFORM:
        return np.ones(space.n_states)
    return space.stationary()


def kernel_weights(space: StateSpace) -> dict[tuple[int, int], float]:
    """Symmetric proposal-free edge kernel pi(i) * accept(i -> j)."""
    pi = space.stationary()
    out = {}
    for (i, j), (tag_ij, _) in zip(space.edges, space.edge_tags):
        out[(i, j)] = pi[i] * chains.move_probability(space.params, tag_ij, 1.0)
    return out


# ---------------------------------------------------------------------------
# flow objects
# ---------------------------------------------------------------------------


class PairFlow:
    """Unit flow between every ordered pair of states of one space.

    Subclasses implement _pair(a, b) returning a dict of directed-edge loads
    routing one unit from a to b.  Results are cached for small spaces.
    """

    def __init__(self, space: StateSpace, mode: str):
        self.space = space
        self.mode = mode
        self._cache: dict = {}
        self._cache_enabled = space.n_states <= 200

    def pair(self, a: int, b: int) -> dict:
        if a == b:
            return {}
        if self._cache_enabled:
            hit = self._cache.get((a, b))
            if hit is not None:
                return hit
        out = self._pair(a, b)
        if self._cache_enabled:
            self._cache[(a, b)] = out
        return out

    def _pair(self, a: int, b: int) -> dict:
        raise NotImplementedError

    def spread(self, members=None) -> dict[int, float]:
        """Mode-proportional distribution over the given states (default all)."""
        if members is None:
            members = range(self.space.n_states)
        if self.mode == UNIFORM:
            w = {i: 1.0 for i in members}
        else:
            w = {i: float(self.space.weights[i]) for i in members}
        total = sum(w.values())
        return {i: v / total for i, v in w.items()}

    def route_distribution(self, mu: dict, nu: dict) -> dict:
        """Conserving flow moving the distribution mu onto nu."""
        out: dict = {}
        for a, ma in mu.items():
            if ma <= 0:
                continue
            for b, nb in nu.items():
                if nb <= 0 or a == b:
                    continue
                _merge(out, self.pair(a, b), ma * nb)
        return out


class DirectPairFlow(PairFlow):
    """Base-case flow: one BFS shortest path per pair, lexicographic ties."""

    def __init__(self, space: StateSpace, mode: str):
        super().__init__(space, mode)
        n = space.n_states
        self._next: list[list[int]] = [[-1] * n for _ in range(n)]
        for src in range(n):
            dist = [-1] * n
            parentv = [-1] * n
            dist[src] = 0
            dq = deque([src])
            while dq:
                u = dq.popleft()
                for v in sorted(space.adjacency[u]):
                    if dist[v] < 0:
                        dist[v] = dist[u] + 1
                        parentv[v] = u
                        dq.append(v)
            for tgt in range(n):
                if tgt != src and dist[tgt] < 0:
                    raise FlowBuildError("state graph is disconnected; no flow exists")
            row = self._next[src]
            for tgt in range(n):
                if tgt == src:
                    continue
                cur = tgt
                while parentv[cur] != src:
                    cur = parentv[cur]
                row[tgt] = cur

    def _pair(self, a: int, b: int) -> dict:
        out: dict = {}
        cur = a
        while cur != b:
            step = self._next[cur][b]
            out[(cur, step)] = out.get((cur, step), 0.0) + 1.0
            cur = step
        return out


class ProductPairFlow(PairFlow):
    """Flow on a certified product class, lifted from the factor flows.

    A commodity (h1, j1) -> (h2, j2) first moves the first coordinate inside
    fiber j1, then the second inside fiber h2.
    """

    def __init__(self, space: StateSpace, mode: str, cert: ProductCertificate,
                 flow_a: "SpaceFlow", flow_b: "SpaceFlow"):
        super().__init__(space, mode)
        self.cert = cert
        self.flow_a = flow_a
        self.flow_b = flow_b
        self.members = list(cert.member_indices)
        self.coord = {i: cert.bijection[i] for i in self.members}
        self.of_pair = {pair: i for i, pair in self.coord.items()}
        self._pi_a = flow_a.space.stationary()
        self._pi_b = flow_b.space.stationary()

    def _pair(self, a: int, b: int) -> dict:
        (ha, ja), (hb, jb) = self.coord[a], self.coord[b]
        out: dict = {}
        if ha != hb:
            for (p, q_), v in self.flow_a.pair(ha, hb).items():
                key = (self.of_pair[(p, ja)], self.of_pair[(q_, ja)])
                out[key] = out.get(key, 0.0) + v
        if ja != jb:
            for (p, q_), v in self.flow_b.pair(ja, jb).items():
                key = (self.of_pair[(hb, p)], self.of_pair[(hb, q_)])
                out[key] = out.get(key, 0.0) + v
        return out

    def product_congestion_stats(self) -> dict:
        """Closed-form congestion of this lifted flow versus its factors.

        Every commodity crosses exactly one first-coordinate leg, spread
        over fibers in proportion to the co-factor demand mass, so lifted
        loads are factor loads scaled per fiber; see measure_product_flow
        for the independent measured check.
        """
        sa, sb = self.flow_a.space, self.flow_b.space
        rho_a_u = self.flow_a.stats["congestion_uniform"]
        rho_b_u = self.flow_b.stats["congestion_uniform"]
        rho_a_k = self.flow_a.stats["congestion_kernel"]
        rho_b_k = self.flow_b.stats["congestion_kernel"]
        out = {"uniform": None, "kernel": None, "factor_kernel": (rho_a_k, rho_b_k)}
        if rho_a_u is not None and rho_b_u is not None:
            out["uniform"] = max(rho_a_u * sb.n_states, rho_b_u * sa.n_states)
        if rho_a_k is not None and rho_b_k is not None:
            out["kernel"] = max(rho_a_k, rho_b_k)
        return out

    def lifted_kernel(self, i: int, j: int) -> float:
        """Kernel weight of a class edge, composed from the factor kernels."""
        (ia, ib), (ja, jb) = self.coord[i], self.coord[j]
        if ia != ja:
            ka = self.flow_a.kernel[(min(ia, ja), max(ia, ja))]
            return ka * self._pi_b[ib]
        kb = self.flow_b.kernel[(min(ib, jb), max(ib, jb))]
        return kb * self._pi_a[ia]


class PieceChainFlow(PairFlow):
    """Flow over a family of certified product pieces covering a state set.

    A commodity travels from its source piece to its target piece along a
    BFS path in the piece graph, handing mass over at shared states when
    pieces overlap or spreading over the shared boundary edges when they
    are disjoint.  Used both for the subclasses inside one class of a
    coupled chain and, for the maximal-set chains, for the flattened cover
    of the whole state space.
    """

    def __init__(self, space: StateSpace, mode: str, pieces: dict,
                 sub_flows: dict, kernel: dict, context: str = "cover"):
        super().__init__(space, mode)
        self.pieces = pieces            # key -> sorted member state indices
        self.sub_flows = sub_flows      # key -> ProductPairFlow
        self.kernel = kernel
        self.context = context
        self.labels = sorted(pieces)
        self._sets = {lab: set(pieces[lab]) for lab in self.labels}
        self.home = {}
        for lab in self.labels:
            for i in pieces[lab]:
                self.home.setdefault(i, lab)
        self._adj = self._build_adjacency()
        self._routes: dict = {}

    def _build_adjacency(self) -> dict:
        adj = {lab: {} for lab in self.labels}
        sets = self._sets
        for la, lb in itertools.combinations(self.labels, 2):
            shared = sets[la] & sets[lb]
            if shared:
                adj[la][lb] = ("overlap", sorted(shared))
                adj[lb][la] = ("overlap", sorted(shared))
                continue
            crossing = [
                (i, j)
                for i in sets[la]
                for j in self.space.adjacency[i]
                if j in sets[lb]
            ]
            if crossing:
                crossing = sorted(
                    (min(i, j), max(i, j)) for i, j in crossing
                )
                crossing = sorted(set(crossing))
                adj[la][lb] = ("edges", crossing)
                adj[lb][la] = ("edges", crossing)
        return adj

    def _route(self, la, lb) -> list:
        key = (la, lb)
        if key in self._routes:
            return self._routes[key]
        prev = {la: None}
        dq = deque([la])
        while dq:
            cur = dq.popleft()
            if cur == lb:
                break
            for nxt in sorted(self._adj[cur]):
                if nxt not in prev:
                    prev[nxt] = cur
                    dq.append(nxt)
        if lb not in prev:
            raise FlowBuildError(f"piece graph of {self.context} is disconnected")
        path = [lb]
        while path[-1] != la:
            path.append(prev[path[-1]])
        path.reverse()
        self._routes[key] = path
        return path

    def _pair(self, a: int, b: int) -> dict:
        # stay inside one subclass whenever both endpoints share it
        for lab in self.labels:
            if a in self._sets[lab] and b in self._sets[lab]:
                return dict(self.sub_flows[lab].pair(a, b))
        la, lb = self.home[a], self.home[b]
        path = self._route(la, lb)
        out: dict = {}
        mu = {a: 1.0}
        for step, lab in enumerate(path):
            flow = self.sub_flows[lab]
            if step == len(path) - 1:
                _merge(out, flow.route_distribution(mu, {b: 1.0}))
                break
            kind, payload = self._adj[lab][path[step + 1]]
            if kind == "overlap":
                nu = self.spread(payload)
                _merge(out, flow.route_distribution(mu, nu))
                mu = nu
            else:
                shares = self._edge_shares(payload)
                mem = self._sets[lab]
                nu: dict = {}
                transport: dict = {}
                mu_next: dict = {}
                for (i, j), w in shares.items():
                    src, dst = (i, j) if i in mem else (j, i)
                    nu[src] = nu.get(src, 0.0) + w
                    transport[(src, dst)] = transport.get((src, dst), 0.0) + w
                    mu_next[dst] = mu_next.get(dst, 0.0) + w
                _merge(out, flow.route_distribution(mu, nu))
                _merge(out, transport)
                mu = mu_next
        return out

    def _edge_shares(self, edges: list) -> dict:
        if self.mode == UNIFORM:
            w = {e: 1.0 for e in edges}
        else:
            w = {e: self.kernel[e] for e in edges}
        total = sum(w.values())
        return {e: v / total for e, v in w.items()}


# ---------------------------------------------------------------------------
# the recursive construction
# ---------------------------------------------------------------------------


@dataclass
class Crossing:
    source: dict          # exit distribution on the earlier class
    transport: dict       # directed edge -> share (sums to 1)
    target: dict          # entry distribution on the later class


class SpaceFlow(PairFlow):
    """Full multicommodity flow on one state space, built recursively."""

    def __init__(self, space: StateSpace, mode: str, variant: Optional[str] = None,
                 _memo: Optional[dict] = None, _depth: int = 0):
        super().__init__(space, mode)
        self.variant = variant or DEFAULT_VARIANT[space.params.kind]
        self.depth = _depth
        self.memo = _memo if _memo is not None else {}
        self.kernel = kernel_weights(space)
        self.partition: Optional[ClassPartition] = None
        self.order: Optional[TraceOrder] = None
        self.covers: dict = {}
        self.class_flows: dict = {}
        self.certificates: dict = {}
        self.base: Optional[DirectPairFlow] = None
        self.flat: Optional[PieceChainFlow] = None
        self.product_checks: list = []
        self._route_cache: dict = {}
        self._build()
        # caching every top-level commodity would hold N^2 dicts alive; only
        # factor flows are queried repeatedly enough to justify it
        self._cache_enabled = _depth > 0 and space.n_states <= 200
        self.stats = self._measure()

    # -- construction -------------------------------------------------------

    def _build(self) -> None:
        if self.depth > 64:
            raise FlowBuildError("separator recursion failed to shrink the instance")
        space = self.space
        from .statespace import check_connectivity

        connected, witness = check_connectivity(space)
        if not connected:
            raise FlowBuildError(
                f"restriction chain is disconnected ({witness[0]!r} unreachable from {witness[1]!r}); "
                "no multicommodity flow exists"
            )
        if space.n_states <= BASE_CASE_STATES or space.graph.n <= 1:
            self.base = DirectPairFlow(space, self.mode)
            return
        sep = build_separator_tree(space.graph)
        self.partition = partition_by_trace(space, sep)
        if self.variant == "relaxed_nonhier":
            # the overlapping product pieces are themselves the routing units;
            # trace classes of the maximal-set chains can be internally
            # disconnected, so no per-class stage exists
            flat = self._flattened_cover_flow()
            if flat is None:
                self.base = DirectPairFlow(space, self.mode)
                self.partition = None
                return
            self.flat = flat
            return
        if self.partition.num_classes == 1:
            only = self.partition.traces[0]
            flow = self._class_flow(only)
            if flow is None:
                self.base = DirectPairFlow(space, self.mode)
                return
            self.class_flows[only] = flow
            return
        if self.variant in ("hier", "relaxed_hier"):
            self.order = build_trace_order(self.partition)
            if not self.order.ok:
                raise FlowBuildError(
                    f"hierarchical conditions violated: {self.order.failures[:2]}"
                )
        for t in self.partition.traces:
            flow = self._class_flow(t)
            if flow is None:
                self.base = DirectPairFlow(space, self.mode)
                self.partition = None
                self.order = None
                return
            self.class_flows[t] = flow

    def _flattened_cover_flow(self) -> Optional[PieceChainFlow]:
        space = self.space
        pieces: dict = {}
        flows: dict = {}
        for t in self.partition.traces:
            if len(self.partition.members[t]) == 1:
                only = self.partition.members[t][0]
                pieces[(t, None)] = [only]
                flows[(t, None)] = DegeneratePairFlow(space, self.mode, [only])
                continue
            cover = subclass_decompose(space, self.partition, t)
            if not cover.ok:
                bad = next(l for l in cover.labels if not cover.certificates[l].ok)
                raise FlowBuildError(
                    f"subclass {bad!r} of class {t!r} failed certification: "
                    f"{cover.certificates[bad].witness}"
                )
            self.covers[t] = cover
            for lab in cover.labels:
                cert = cover.certificates[lab]
                if max(cert.space_a.n_states, cert.space_b.n_states) >= space.n_states:
                    return None
                fa = self._sub_flow(cert.factor_a, cert.space_a)
                fb = self._sub_flow(cert.factor_b, cert.space_b)
                pflow = ProductPairFlow(space, self.mode, cert, fa, fb)
                self._record_product(pflow)
                pieces[(t, lab)] = cover.members[lab]
                flows[(t, lab)] = pflow
        return PieceChainFlow(space, self.mode, pieces, flows, self.kernel,
                              context="the flattened maximal-chain cover")

    def _class_flow(self, trace) -> Optional[PairFlow]:
        """Product flow (or chained subclass flow) for one class; None if the
        class cannot shrink, which sends the whole space to the base case."""
        space = self.space
        kind = space.params.kind
        members = self.partition.members[trace]
        if len(members) == 1:
            return DegeneratePairFlow(space, self.mode, members)
        if kind in part.PRODUCT_KINDS:
            cert = certify_cartesian_product(space, self.partition, trace)
            if not cert.ok:
                raise FlowBuildError(
                    f"class {trace!r} failed product certification: {cert.witness}"
                )
            if max(cert.space_a.n_states, cert.space_b.n_states) >= space.n_states:
                return None
            self.certificates[trace] = cert
            fa = self._sub_flow(cert.factor_a, cert.space_a)
            fb = self._sub_flow(cert.factor_b, cert.space_b)
            flow = ProductPairFlow(space, self.mode, cert, fa, fb)
            self._record_product(flow)
            return flow
        cover = subclass_decompose(space, self.partition, trace)
        if not cover.ok:
            bad = next(l for l in cover.labels if not cover.certificates[l].ok)
            raise FlowBuildError(
                f"subclass {bad!r} of class {trace!r} failed certification: "
                f"{cover.certificates[bad].witness}"
            )
        self.covers[trace] = cover
        sub_flows = {}
        for lab in cover.labels:
            cert = cover.certificates[lab]
            if max(cert.space_a.n_states, cert.space_b.n_states) >= space.n_states:
                return None
            fa = self._sub_flow(cert.factor_a, cert.space_a)
            fb = self._sub_flow(cert.factor_b, cert.space_b)
            flow = ProductPairFlow(space, self.mode, cert, fa, fb)
            self._record_product(flow)
            sub_flows[lab] = flow
        return PieceChainFlow(space, self.mode, dict(cover.members), sub_flows,
                              self.kernel, context=f"class {trace!r}")

    def _sub_flow(self, factor, factor_space: StateSpace) -> "SpaceFlow":
        key = (factor.graph.signature(), factor.params, self.mode, self.variant)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        flow = SpaceFlow(factor_space, self.mode, self.variant,
                         _memo=self.memo, _depth=self.depth + 1)
        self.memo[key] = flow
        return flow

    def _record_product(self, flow: ProductPairFlow) -> None:
        self.product_checks.append(flow.product_congestion_stats())

    # -- routing ------------------------------------------------------------

    def _pair(self, a: int, b: int) -> dict:
        if self.base is not None:
            return self.base.pair(a, b)
        if self.flat is not None:
            return self.flat.pair(a, b)
        ta, tb = self.partition.class_of[a], self.partition.class_of[b]
        if ta == tb:
            return dict(self.class_flows[ta].pair(a, b))
        route = self._route(ta, tb)
        crossings = [self._crossing(route[i], route[i + 1]) for i in range(len(route) - 1)]
        out: dict = {}
        _merge(out, self.class_flows[ta].route_distribution({a: 1.0}, crossings[0].source))
        for i, cr in enumerate(crossings):
            _merge(out, cr.transport)
            if i + 1 < len(crossings):
                mid = route[i + 1]
                _merge(out, self._mid_segment(mid, cr.target, crossings[i + 1].source))
        _merge(out, self.class_flows[tb].route_distribution(crossings[-1].target, {b: 1.0}))
        return out

    def _route(self, ta, tb) -> list:
        key = (ta, tb)
        if key in self._route_cache:
            return self._route_cache[key]
        if self.variant in ("hier", "relaxed_hier"):
            path = hierarchical_route(self.order, ta, tb)
        else:
            adj = self.partition.adjacency()
            prev = {ta: None}
            dq = deque([ta])
            while dq:
                cur = dq.popleft()
                for nxt in sorted(adj[cur]):
                    if nxt not in prev:
                        prev[nxt] = cur
                        dq.append(nxt)
            if tb not in prev:
                raise FlowBuildError("class adjacency graph is disconnected")
            path = [tb]
            while path[-1] != ta:
                path.append(prev[path[-1]])
            path.reverse()
        self._route_cache[key] = path
        return path

    def _mid_segment(self, trace, mu: dict, nu: dict) -> dict:
        """Two-phase traversal of an intermediate class: spread, re-concentrate."""
        flow = self.class_flows[trace]
        u = flow.spread(self.partition.members[trace])
        out = flow.route_distribution(mu, u)
        _merge(out, flow.route_distribution(u, nu))
        return out

    def _crossing(self, ta, tb) -> Crossing:
        """Boundary transport from class ta to class tb (adjacent on a route)."""
        key = (min(ta, tb), max(ta, tb))
        edges = self.partition.inter_edges.get(key, [])
        if not edges:
            raise FlowBuildError(f"no boundary edges between {ta!r} and {tb!r}")
        members_a = set(self.partition.members[ta])
        if self.variant in ("hier", "relaxed_hier"):
            if tb in self.order.parents.get(ta, []):
                # ascent: every state of the child ta crosses its matched edge
                u = self.class_flows[ta].spread(self.partition.members[ta])
                source, transport, target = {}, {}, {}
                for i, j in edges:
                    c, p = (i, j) if i in members_a else (j, i)
                    w = u[c]
                    source[c] = source.get(c, 0.0) + w
                    transport[(c, p)] = w
                    target[p] = target.get(p, 0.0) + w
                return Crossing(source, transport, target)
            if ta not in self.order.parents.get(tb, []):
                raise FlowBuildError(
                    f"route step {ta!r} -> {tb!r} is not a parent-child boundary"
                )
            # descent: concentrate onto the matched partners of the child's spread
            u = self.class_flows[tb].spread(self.partition.members[tb])
            source, transport, target = {}, {}, {}
            for i, j in edges:
                c, p = (i, j) if i not in members_a else (j, i)
                w = u[c]
                source[p] = source.get(p, 0.0) + w
                transport[(p, c)] = w
                target[c] = target.get(c, 0.0) + w
            return Crossing(source, transport, target)
        shares = self._edge_shares(edges)
        source, transport, target = {}, {}, {}
        for (i, j), w in shares.items():
            src, dst = (i, j) if i in members_a else (j, i)
            source[src] = source.get(src, 0.0) + w
            transport[(src, dst)] = transport.get((src, dst), 0.0) + w
            target[dst] = target.get(dst, 0.0) + w
        return Crossing(source, transport, target)

    def _edge_shares(self, edges: list) -> dict:
        if self.mode == UNIFORM:
            w = {tuple(e): 1.0 for e in edges}
        else:
            w = {tuple(e): self.kernel[tuple(e)] for e in edges}
        total = sum(w.values())
        return {e: v / total for e, v in w.items()}

    # -- measurement --------------------------------------------------------

    def aggregate_loads(self) -> dict:
        """Total directed-edge loads under this flow's demand model."""
        d = state_demands(self.space, self.mode)
        out: dict = {}
        for a in range(self.space.n_states):
            if d[a] == 0:
                continue
            for b in range(self.space.n_states):
                if a == b or d[b] == 0:
                    continue
                _merge(out, self.pair(a, b), float(d[a] * d[b]))
        return out

    def _measure(self) -> dict:
        loads = self.aggregate_loads()
        edge_set = set(self.space.edges)
        for (i, j) in loads:
            key = (min(i, j), max(i, j))
            if i == j or key not in edge_set:
                raise FlowBuildError(f"flow uses a non-edge {(i, j)}")
        stats = {
            "mode": self.mode,
            "variant": self.variant,
            "congestion_uniform": None,
            "congestion_kernel": None,
            "congestion_transition": None,
        }
        if self.mode == UNIFORM:
            stats["congestion_uniform"] = max(loads.values(), default=0.0)
        else:
            ker = self.kernel
            ratios = [v / ker[(min(i, j), max(i, j))] for (i, j), v in loads.items()]
            stats["congestion_kernel"] = max(ratios, default=0.0)
            stats["congestion_transition"] = stats["congestion_kernel"] * self.space.normalizer
        self._loads = loads
        return stats

    # -- conservation -------------------------------------------------------

    def check_conservation(self, tol: float = 1e-9, sample: Optional[int] = None) -> None:
        """Verify per-commodity conservation and demand satisfaction."""
        n = self.space.n_states
        pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
        if sample is not None and len(pairs) > sample:
            step = len(pairs) // sample
            pairs = pairs[::step]
        edge_set = set(self.space.edges)
        for a, b in pairs:
            f = self.pair(a, b)
            net: dict = {a: 0.0, b: 0.0}
            for (i, j), v in f.items():
                if v < -tol:
                    raise FlowBuildError(f"negative flow on {(i, j)}")
                if (min(i, j), max(i, j)) not in edge_set:
                    raise FlowBuildError(f"commodity ({a},{b}) uses non-edge {(i, j)}")
                net[i] = net.get(i, 0.0) + v
                net[j] = net.get(j, 0.0) - v
            for v, x in net.items():
                want = 1.0 if v == a else (-1.0 if v == b else 0.0)
                if abs(x - want) > tol:
                    raise FlowBuildError(
                        f"commodity ({a},{b}): net flow {x} at state {v}, expected {want}"
                    )

    def level_congestions(self) -> dict[int, float]:
        """Worst kernel (weighted) or raw (uniform) congestion per recursion level."""
        out: dict[int, float] = {}
        seen = set()

        def visit(flow: "SpaceFlow"):
            if id(flow) in seen:
                return
            seen.add(id(flow))
            val = (
                flow.stats["congestion_kernel"]
                if flow.mode == WEIGHTED
                else flow.stats["congestion_uniform"]
            )
            if val is not None:
                out[flow.depth] = max(out.get(flow.depth, 0.0), val)
            holders = list(flow.class_flows.values())
            if flow.flat is not None:
                holders.append(flow.flat)
            for cf in holders:
                for sub in _product_flows_of(cf):
                    visit(sub.flow_a)
                    visit(sub.flow_b)

        visit(self)
        return out


def _product_flows_of(cf: PairFlow) -> list[ProductPairFlow]:
    if isinstance(cf, ProductPairFlow):
        return [cf]
    if isinstance(cf, PieceChainFlow):
        return [f for f in cf.sub_flows.values() if isinstance(f, ProductPairFlow)]
    return []


class DegeneratePairFlow(PairFlow):
    """Single-member class: no internal pairs exist."""

    def __init__(self, space: StateSpace, mode: str, members):
        super().__init__(space, mode)
        self.members = list(members)

    def _pair(self, a: int, b: int) -> dict:
        raise FlowBuildError("a single-state class has no internal commodities")


# ---------------------------------------------------------------------------
# public constructors per variant
# ---------------------------------------------------------------------------


def build_flow(space: StateSpace, variant: Optional[str] = None, mode: str = UNIFORM) -> SpaceFlow:
    if variant is not None and variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    return SpaceFlow(space, mode, variant)


def build_flow_nonhier(space: StateSpace, mode: str = UNIFORM) -> SpaceFlow:
    return build_flow(space, "nonhier", mode)


def build_flow_hier(space: StateSpace, mode: str = UNIFORM) -> SpaceFlow:
    return build_flow(space, "hier", mode)


def build_flow_relaxed(space: StateSpace, variant: Optional[str] = None, mode: str = UNIFORM) -> SpaceFlow:
    if variant is None:
        variant = DEFAULT_VARIANT[space.params.kind]
    if variant not in ("relaxed_hier", "relaxed_nonhier"):
        raise ValueError("relaxed flows need a relaxed variant")
    return build_flow(space, variant, mode)


def reweight_flow(flow: SpaceFlow, lam: Optional[float] = None) -> SpaceFlow:
    """Rebuild a uniform-demand flow under stationary-product demands.

    Boundary shares become kernel-proportional and spreads stationary-
    proportional; with lam = 1 the construction coincides with the uniform
    one up to global normalization.
    """
    if lam is not None and lam <= 0:
        raise ValueError("lambda must be positive")
    space = flow.space
    if lam is not None and lam != space.params.lam:
        params = ChainParams(space.params.kind, lam=lam, q=space.params.q)
        space = build_state_space(space.graph, params)
    return SpaceFlow(space, WEIGHTED, flow.variant)


def product_flow(cert: ProductCertificate, flow_a: SpaceFlow, flow_b: SpaceFlow,
                 space: StateSpace, mode: str = WEIGHTED) -> ProductPairFlow:
    """Lift two factor flows onto a certified product class and verify the
    combiner bound: measured lifted congestion at most the worst factor's."""
    flow = ProductPairFlow(space, mode, cert, flow_a, flow_b)
    measured = measure_product_flow(flow)
    if mode == WEIGHTED:
        bound = max(measured["factor_kernel"]) + PRODUCT_BOUND_TOL
        if measured["kernel"] > bound:
            raise FlowBuildError(
                f"lifted congestion {measured['kernel']} exceeds factor bound {bound}"
            )
    return flow


def measure_product_flow(flow: ProductPairFlow) -> dict:
    """Aggregate a lifted class flow over its own demand model and measure
    congestion against the composed factor kernels."""
    da = state_demands(flow.flow_a.space, flow.mode)
    db = state_demands(flow.flow_b.space, flow.mode)
    d = {i: float(da[ha] * db[jb]) for i, (ha, jb) in flow.coord.items()}
    loads: dict = {}
    for a in flow.members:
        for b in flow.members:
            if a != b:
                _merge(loads, flow.pair(a, b), d[a] * d[b])
    out = {"uniform": None, "kernel": None,
           "factor_kernel": (flow.flow_a.stats["congestion_kernel"],
                             flow.flow_b.stats["congestion_kernel"])}
    if flow.mode == UNIFORM:
        out["uniform"] = max(loads.values(), default=0.0)
    else:
        ratios = [v / flow.lifted_kernel(i, j) for (i, j), v in loads.items()]
        out["kernel"] = max(ratios, default=0.0)
    return out


# ---------------------------------------------------------------------------
# free-standing weighted factors (for combiner checks on arbitrary graphs)
# ---------------------------------------------------------------------------


class WeightedFactor:
    """A weighted graph with a shortest-path multicommodity flow on it.

    Vertices carry positive weights pi (normalized), edges symmetric kernels
    q; each ordered pair exchanges pi(s) * pi(t) units along one BFS shortest
    path with lexicographic tie-breaking.  Used to exercise the Cartesian
    combiner away from chain-derived state spaces.
    """

    def __init__(self, n: int, edges: list[tuple[int, int]], pi: np.ndarray, q: dict):
        self.n = n
        self.edges = sorted((min(u, v), max(u, v)) for u, v in edges)
        self.pi = np.asarray(pi, dtype=float)
        self.pi = self.pi / self.pi.sum()
        self.q = {(min(u, v), max(u, v)): float(w) for (u, v), w in q.items()}
        adj = [[] for _ in range(n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        self.adjacency = [sorted(a) for a in adj]
        self.loads = self._route_all()
        self.rho = max(
            (self.loads.get((u, v), 0.0) + self.loads.get((v, u), 0.0)) / self.q[(u, v)]
            for u, v in self.edges
        )

    def _route_all(self) -> dict:
        loads: dict = {}
        for src in range(self.n):
            dist = [-1] * self.n
            parent = [-1] * self.n
            dist[src] = 0
            dq = deque([src])
            while dq:
                u = dq.popleft()
                for v in self.adjacency[u]:
                    if dist[v] < 0:
                        dist[v] = dist[u] + 1
                        parent[v] = u
                        dq.append(v)
            for tgt in range(self.n):
                if tgt == src:
                    continue
                if dist[tgt] < 0:
                    raise FlowBuildError("factor graph is disconnected")
                amount = float(self.pi[src] * self.pi[tgt])
                cur = tgt
                while cur != src:
                    p = parent[cur]
                    loads[(p, cur)] = loads.get((p, cur), 0.0) + amount
                    cur = p
        return loads


def product_factor_congestion(h: WeightedFactor, j: WeightedFactor) -> dict:
    """Measured congestion of the lifted product flow of two factors.

    The lift routes the first coordinate inside the source's second-coordinate
    fiber, then the second coordinate in the target's first-coordinate fiber,
    so per-fiber loads scale by the co-factor stationary mass; the maximum is
    taken over the explicit (edge, fiber) grid.
    """
    worst = 0.0
    for (u, v), q in h.q.items():
        load = h.loads.get((u, v), 0.0) + h.loads.get((v, u), 0.0)
        for c in range(j.n):
            lifted_load = load * j.pi[c]
            lifted_q = q * j.pi[c]
            worst = max(worst, lifted_load / lifted_q)
    for (u, v), q in j.q.items():
        load = j.loads.get((u, v), 0.0) + j.loads.get((v, u), 0.0)
        for c in range(h.n):
            lifted_load = load * h.pi[c]
            lifted_q = q * h.pi[c]
            worst = max(worst, lifted_load / lifted_q)
    return {"product": worst, "factors": (h.rho, j.rho)}


def congestion(flow: SpaceFlow, normalization: str = "auto") -> float:
    """Worst-edge congestion of the aggregated flow.

    uniform: max raw directed-edge load (unit pair demands);
    kernel: max load / (pi * acceptance), the proposal-free weighted form;
    transition: max load / Q(e) with the true one-step edge weights.
    """
    stats = flow.stats
    if normalization == "auto":
        normalization = "uniform" if flow.mode == UNIFORM else "transition"
    key = f"congestion_{normalization}"
    if key not in stats or stats[key] is None:
        raise ValueError(f"flow was not built in a mode that measures {normalization}")
    return stats[key]
