"""Separator-trace decomposition of a state space.

States that restrict identically to a balanced separator X of the underlying
graph form a class.  Classes of the well-behaved chains are certified to be
Cartesian products of two smaller state spaces (one per side of the
separator); the coupled chains are covered by subclasses that are products.
The containment order on traces drives hierarchical flow routing, and every
structural claim is verified exhaustively rather than assumed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import chains
from .chains import ChainParams, ConfigurationError
from .decomposition import SeparatorTree
from .graphs import (
    Graph,
    ROLE_FORBIDDEN,
    ROLE_NORMAL,
    ROLE_STEINER,
    induced_subgraph,
    make_graph,
    with_annotations,
)
from .statespace import StateSpace, build_state_space

MAX_BETA_B = 4
MAX_BETA_SEPARATOR = 8

# chains whose trace order supports hierarchical routing; True means the
# smaller trace is the ancestor (constraints relax as elements are dropped)
ORDERED_KINDS = {
    chains.KIND_IS: True,
    chains.KIND_PCOL: True,
    chains.KIND_BM: True,
    chains.KIND_BEC: False,
    chains.KIND_CSDS: False,
}

# chains whose classes are certified directly; the rest need subclass covers
PRODUCT_KINDS = (chains.KIND_IS, chains.KIND_COL, chains.KIND_PCOL, chains.KIND_BM)
SUBCLASS_KINDS = (chains.KIND_BEC, chains.KIND_CSDS, chains.KIND_MIS, chains.KIND_MBM)


class SeparatorError(ValueError):
    pass


class CertificationError(RuntimeError):
    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


def _sep_triple(sep) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
    if isinstance(sep, SeparatorTree):
        return sep.x, sep.side_a, sep.side_b
    x, a, b = sep
    return tuple(x), tuple(a), tuple(b)


def _check_separator(g: Graph, x, a, b) -> None:
    xs, as_, bs = set(x), set(a), set(b)
    if xs | as_ | bs != set(range(g.n)) or (xs & as_) or (xs & bs) or (as_ & bs):
        raise SeparatorError("X, A, B do not partition the vertices")
    for u, v in g.edges:
        if (u in as_ and v in bs) or (u in bs and v in as_):
            raise SeparatorError(f"edge ({u}, {v}) joins the two sides; X is not a separator")


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------


def trace_edge_ids(g: Graph, kind: str, x: Sequence[int]) -> tuple[int, ...]:
    """Edge ids pinned by the trace of an edge chain.

    b-matchings pin every selected edge touching X (the two sides then
    consume disjoint residual capacity); b-edge covers and maximal
    b-matchings pin only the edges inside X and split the rest by subclass.
    """
    xs = set(x)
    if kind == chains.KIND_BM:
        return tuple(i for i, (u, v) in enumerate(g.edges) if u in xs or v in xs)
    return tuple(i for i, (u, v) in enumerate(g.edges) if u in xs and v in xs)


def trace_key(g: Graph, params: ChainParams, s, x: Sequence[int]):
    """Canonical restriction of a state to the separator."""
    kind = params.kind
    if kind in chains.VERTEX_SUBSET_KINDS:
        return tuple(v for v in x if (s >> v) & 1)
    if kind in chains.COLORING_KINDS:
        return tuple(s[v] for v in x)
    ids = trace_edge_ids(g, kind, x)
    return tuple(i for i in ids if (s >> i) & 1)


@dataclass
class ClassPartition:
    space: StateSpace
    x: tuple[int, ...]
    side_a: tuple[int, ...]
    side_b: tuple[int, ...]
    traces: list                           # canonical order
    members: dict                          # trace -> sorted state indices
    class_of: list                         # state index -> trace
    intra_edges: dict                      # trace -> [(i, j)]
    inter_edges: dict                      # (traceA, traceB), A < B -> [(i, j)]

    @property
    def num_classes(self) -> int:
        return len(self.traces)

    def adjacency(self) -> dict:
        adj = {t: set() for t in self.traces}
        for (ta, tb) in self.inter_edges:
            adj[ta].add(tb)
            adj[tb].add(ta)
        return adj


def partition_by_trace(space: StateSpace, sep) -> ClassPartition:
    """Group states by their separator trace and split edges accordingly."""
    g = space.graph
    x, a, b = _sep_triple(sep)
    _check_separator(g, x, a, b)
    members: dict = {}
    class_of = []
    for i, s in enumerate(space.states):
        t = trace_key(g, space.params, s, x)
        members.setdefault(t, []).append(i)
        class_of.append(t)
    traces = sorted(members)
    intra: dict = {t: [] for t in traces}
    inter: dict = {}
    for (i, j) in space.edges:
        ti, tj = class_of[i], class_of[j]
        if ti == tj:
            intra[ti].append((i, j))
        else:
            key = (ti, tj) if ti <= tj else (tj, ti)
            inter.setdefault(key, []).append((i, j))
    return ClassPartition(
        space=space,
        x=x,
        side_a=a,
        side_b=b,
        traces=traces,
        members=members,
        class_of=class_of,
        intra_edges=intra,
        inter_edges=inter,
    )


# ---------------------------------------------------------------------------
# factor instances
# ---------------------------------------------------------------------------


@dataclass
class FactorSide:
    """One side's residual problem, relabeled densely, with extraction maps."""

    graph: Graph
    params: ChainParams
    vert_of_factor: tuple[int, ...]                  # factor vertex -> original
    edge_of_factor: Optional[tuple[int, ...]] = None  # factor edge -> original

    def extract(self, s):
        kind = self.params.kind
        if kind in chains.COLORING_KINDS:
            return tuple(s[v] for v in self.vert_of_factor)
        if kind in chains.VERTEX_SUBSET_KINDS:
            out = 0
            for fi, ov in enumerate(self.vert_of_factor):
                if (s >> ov) & 1:
                    out |= 1 << fi
            return out
        out = 0
        for fi, oe in enumerate(self.edge_of_factor):
            if (s >> oe) & 1:
                out |= 1 << fi
        return out


def _vertex_factor(g: Graph, params: ChainParams, verts: Sequence[int], **annot) -> FactorSide:
    sub, vmap = induced_subgraph(g, verts)
    if annot:
        sub = with_annotations(sub, **annot)
    order = tuple(sorted(vmap, key=vmap.get))
    return FactorSide(sub, params, order)


def _edge_factor(g: Graph, params: ChainParams, verts: Sequence[int], edge_ids: Sequence[int],
                 b_override: dict[int, int] | None = None,
                 saturate: dict[int, bool] | None = None) -> FactorSide:
    verts = sorted(set(verts))
    vmap = {v: i for i, v in enumerate(verts)}
    eids = sorted(edge_ids)
    edges = [(vmap[g.edges[i][0]], vmap[g.edges[i][1]]) for i in eids]
    bvals = [g.b(v) for v in verts]
    if b_override:
        for v, val in b_override.items():
            bvals[vmap[v]] = val
    sat = None
    if saturate is not None or g.must_saturate is not None:
        sat = [g.saturate_required(v) for v in verts]
        if saturate:
            for v, flag in saturate.items():
                sat[vmap[v]] = sat[vmap[v]] or flag
    sub = make_graph(len(verts), edges, b_values=tuple(bvals),
                     must_saturate=tuple(sat) if sat is not None else None)
    return FactorSide(sub, params, tuple(verts), tuple(eids))


def factor_sides(g: Graph, params: ChainParams, x, a, b, trace, label=None) -> tuple[FactorSide, FactorSide]:
    """Residual instances on the two sides, given a trace (and subclass label).

    The restriction rules per chain: independent sets delete the trace's
    neighbors; colorings shrink lists by the trace's colors; b-matchings
    decrement capacities by pinned incident edges; b-edge covers give the
    separator ports their beta quotas; dominating sets propagate roles;
    maximal chains pin covers/boundaries from the subclass label.
    """
    kind = params.kind
    xs = set(x)
    if kind == chains.KIND_IS:
        tset = set(trace)
        blocked = set()
        for t in tset:
            blocked.update(g.adjacency[t])
        return (
            _vertex_factor(g, params, [v for v in a if v not in blocked]),
            _vertex_factor(g, params, [v for v in b if v not in blocked]),
        )

    if kind in chains.COLORING_KINDS:
        tcol = dict(zip(x, trace))
        def side(verts):
            verts = sorted(verts)
            lists = []
            for v in verts:
                lst = set(g.color_list(v, params.q))
                for u in g.adjacency[v]:
                    if u in tcol and tcol[u] != 0:
                        lst.discard(tcol[u])
                lists.append(frozenset(lst))
            sub, vmap = induced_subgraph(g, verts)
            sub = with_annotations(sub, color_lists=tuple(lists))
            return FactorSide(sub, params, tuple(verts))
        return side(a), side(b)

    if kind == chains.KIND_BM:
        tset = set(trace)
        deg_t = [0] * g.n
        for i in tset:
            u, v = g.edges[i]
            deg_t[u] += 1
            deg_t[v] += 1
        def side(verts):
            vset = set(verts)
            eids = [i for i, (u, v) in enumerate(g.edges) if u in vset and v in vset]
            b_over = {v: g.b(v) - deg_t[v] for v in verts}
            return _edge_factor(g, params, verts, eids, b_override=b_over)
        return side(a), side(b)

    if kind == chains.KIND_BEC:
        if label is None:
            # naive attempt: neither side owes the separator anything; the
            # coupling at X then shows up as a failed bijection
            beta = {xv: 0 for xv in x}
            def side0(verts):
                vset = set(verts)
                eids = [
                    i for i, (u, v) in enumerate(g.edges)
                    if (u in vset and v in vset)
                    or (u in vset and v in xs)
                    or (v in vset and u in xs)
                ]
                return _edge_factor(g, params, list(verts) + list(x), eids, b_override=beta)
            return side0(a), side0(b)
        beta = dict(zip(x, label))
        def side(verts, quota):
            vset = set(verts)
            eids = [
                i for i, (u, v) in enumerate(g.edges)
                if (u in vset and v in vset)
                or (u in vset and v in xs)
                or (v in vset and u in xs)
            ]
            return _edge_factor(g, params, list(verts) + list(x), eids, b_override=quota)
        quota_a = {xv: beta[xv] for xv in x}
        # the complementary side owes the rest of the residual requirement
        deg_t = [0] * g.n
        for i in trace:
            u, v = g.edges[i]
            deg_t[u] += 1
            deg_t[v] += 1
        quota_b = {xv: max(g.b(xv) - deg_t[xv], 0) - beta[xv] for xv in x}
        return side(a, quota_a), side(b, quota_b)

    if kind == chains.KIND_CSDS:
        tset = set(trace)
        u_set = undominated_separator_vertices(g, x, trace)
        if label is None:
            # naive attempt: ignore the unsettled separator vertices entirely
            u_set = set()
            label = ()
        w = set(label)
        def side(verts, ports):
            keep = []
            roles = {}
            for v in verts:
                if g.role(v) == ROLE_FORBIDDEN and any(u in tset for u in g.adjacency[v]):
                    continue  # already dominated, never selectable: inert
                keep.append(v)
                if g.role(v) != ROLE_FORBIDDEN and any(u in tset for u in g.adjacency[v]):
                    roles[v] = ROLE_STEINER
                else:
                    roles[v] = g.role(v)
            for p in ports:
                keep.append(p)
                roles[p] = ROLE_FORBIDDEN
            keep = sorted(keep)
            sub, vmap = induced_subgraph(g, keep)
            sub = with_annotations(sub, roles=tuple(roles[v] for v in keep))
            return FactorSide(sub, params, tuple(keep))
        return side(a, sorted(w)), side(b, sorted(u_set - w))

    if kind == chains.KIND_MIS:
        if label is None:
            label = ()  # naive attempt: delete only the trace's neighbors
        tset = set(trace)
        cset = set(label)
        removed = set()
        for t in tset:
            removed.update(g.adjacency[t])
        for c in cset:
            removed.add(c)
            removed.update(g.adjacency[c])
        return (
            _vertex_factor(g, params, [v for v in a if v not in removed]),
            _vertex_factor(g, params, [v for v in b if v not in removed]),
        )

    if kind == chains.KIND_MBM:
        if label is None:
            label = tuple(trace)  # naive attempt: pin only the inside-X edges
        fset = set(label)  # selected edges incident to X
        deg_f = [0] * g.n
        for i in fset:
            u, v = g.edges[i]
            deg_f[u] += 1
            deg_f[v] += 1
        unsat_x = {xv for xv in x if deg_f[xv] < g.b(xv)}
        def side(verts):
            vset = set(verts)
            eids = [i for i, (u, v) in enumerate(g.edges) if u in vset and v in vset]
            b_over = {v: g.b(v) - deg_f[v] for v in verts}
            sat = {}
            for i, (u, v) in enumerate(g.edges):
                if i in fset:
                    continue
                for p, q_ in ((u, v), (v, u)):
                    if p in vset and q_ in unsat_x:
                        sat[p] = True
            return _edge_factor(g, params, verts, eids, b_override=b_over, saturate=sat)
        return side(a), side(b)

    raise AssertionError(kind)


def undominated_separator_vertices(g: Graph, x, trace) -> set[int]:
    """Separator vertices whose domination the trace leaves unsettled."""
    tset = set(trace)
    out = set()
    for v in x:
        if g.role(v) == ROLE_STEINER:
            continue
        if v in tset:
            continue
        if any(u in tset for u in g.adjacency[v]):
            continue
        out.add(v)
    return out


# ---------------------------------------------------------------------------
# product certification
# ---------------------------------------------------------------------------


@dataclass
class ProductCertificate:
    trace: object
    label: object
    factor_a: FactorSide
    factor_b: FactorSide
    space_a: StateSpace
    space_b: StateSpace
    member_indices: list[int]
    bijection: dict              # state index -> (ia, ib)
    ok: bool
    witness: Optional[str] = None


def certify_cartesian_product(
    space: StateSpace,
    partition: ClassPartition,
    trace,
    members: Optional[list[int]] = None,
    label=None,
) -> ProductCertificate:
    """Exhaustively verify that a class (or subclass) is a product.

    Checks the state bijection (member <-> factor pair, total, injective,
    onto) and the edge correspondence in both directions: every internal
    edge is exactly one factor move, and every factor move lifts to an
    internal edge.  Fails with a witness otherwise.
    """
    g = space.graph
    if members is None:
        members = partition.members[trace]
    fa, fb = factor_sides(g, space.params, partition.x, partition.side_a, partition.side_b, trace, label)
    sa = build_state_space(fa.graph, fa.params)
    sb = build_state_space(fb.graph, fb.params)

    def fail(witness):
        return ProductCertificate(trace, label, fa, fb, sa, sb, list(members), {}, False, witness)

    bijection = {}
    seen_pairs = {}
    for i in members:
        s = space.states[i]
        ea, eb = fa.extract(s), fb.extract(s)
        ia, ib = sa.index.get(ea), sb.index.get(eb)
        if ia is None or ib is None:
            return fail(f"state {s!r} restricts outside the factor space")
        if (ia, ib) in seen_pairs:
            return fail(f"states {space.states[seen_pairs[(ia, ib)]]!r} and {s!r} collide in the product")
        seen_pairs[(ia, ib)] = i
        bijection[i] = (ia, ib)
    if len(members) != sa.n_states * sb.n_states:
        return fail(
            f"class has {len(members)} states but factors give "
            f"{sa.n_states} x {sb.n_states}"
        )

    member_set = set(members)
    internal = [
        (i, j)
        for (i, j) in space.edges
        if i in member_set and j in member_set
    ]
    edges_a, edges_b = set(sa.edges), set(sb.edges)
    internal_pairs = set()
    for i, j in internal:
        (ia, ib), (ja, jb) = bijection[i], bijection[j]
        a_moves = ia != ja
        b_moves = ib != jb
        if a_moves == b_moves:
            return fail(f"edge {space.states[i]!r} -- {space.states[j]!r} moves in both factors or neither")
        if a_moves and (min(ia, ja), max(ia, ja)) not in edges_a:
            return fail(f"edge {space.states[i]!r} -- {space.states[j]!r} is not a factor move")
        if b_moves and (min(ib, jb), max(ib, jb)) not in edges_b:
            return fail(f"edge {space.states[i]!r} -- {space.states[j]!r} is not a factor move")
        internal_pairs.add((min(bijection[i], bijection[j]), max(bijection[i], bijection[j])))

    expected = set()
    for (ia, ja) in sa.edges:
        for ib in range(sb.n_states):
            p, q_ = (ia, ib), (ja, ib)
            expected.add((min(p, q_), max(p, q_)))
    for (ib, jb) in sb.edges:
        for ia in range(sa.n_states):
            p, q_ = (ia, ib), (ia, jb)
            expected.add((min(p, q_), max(p, q_)))
    if internal_pairs != expected:
        missing = expected - internal_pairs
        extra = internal_pairs - expected
        sample = next(iter(missing or extra))
        return fail(f"edge sets disagree (product edge {sample} {'missing' if missing else 'extra'})")

    return ProductCertificate(trace, label, fa, fb, sa, sb, list(members), bijection, True, None)


# ---------------------------------------------------------------------------
# trace order (hierarchical chains)
# ---------------------------------------------------------------------------


@dataclass
class TraceOrder:
    partition: ClassPartition
    smaller_is_ancestor: bool
    parents: dict               # trace -> sorted list of covering parent traces
    children: dict              # trace -> sorted list of covering child traces
    maximal: object             # the unique maximal trace
    ok: bool
    failures: list[str] = field(default_factory=list)


def _trace_elements(kind: str, trace) -> set:
    if kind in chains.COLORING_KINDS:
        return {(i, c) for i, c in enumerate(trace) if c != 0}
    return set(trace)


def _trace_contains(kind: str, small, big) -> bool:
    return _trace_elements(kind, small) <= _trace_elements(kind, big)


def build_trace_order(partition: ClassPartition) -> TraceOrder:
    """Covering relation on realized traces, with the order conditions checked.

    Parent means one trace element less constrained: dropped for independent
    sets, partial colorings, and b-matchings; added for b-edge covers and
    dominating sets (where adding is the always-valid direction).  Verifies
    the size monotonicity, the unique maximal element, and that parent-child
    boundaries are perfect matchings onto the child.
    """
    kind = partition.space.params.kind
    if kind not in ORDERED_KINDS:
        raise ConfigurationError(f"{kind} has no hierarchical trace order")
    smaller_is_ancestor = ORDERED_KINDS[kind]
    traces = partition.traces
    failures: list[str] = []

    parents: dict = {t: [] for t in traces}
    children: dict = {t: [] for t in traces}
    for ta, tb in itertools.combinations(traces, 2):
        ea, eb = _trace_elements(kind, ta), _trace_elements(kind, tb)
        if len(ea ^ eb) != 1:
            continue
        small, big = (ta, tb) if ea < eb else (tb, ta)
        if not (ea < eb or eb < ea):
            continue
        parent, child = (small, big) if smaller_is_ancestor else (big, small)
        parents[child].append(parent)
        children[parent].append(child)
    for t in traces:
        parents[t].sort()
        children[t].sort()

    # condition: comparable traces have monotone class sizes
    for ta, tb in itertools.combinations(traces, 2):
        if _trace_contains(kind, ta, tb):
            small, big = ta, tb
        elif _trace_contains(kind, tb, ta):
            small, big = tb, ta
        else:
            continue
        anc, desc = (small, big) if smaller_is_ancestor else (big, small)
        if len(partition.members[anc]) < len(partition.members[desc]):
            failures.append(
                f"|class {anc!r}| = {len(partition.members[anc])} < "
                f"|class {desc!r}| = {len(partition.members[desc])}"
            )

    roots = [t for t in traces if not parents[t]]
    maximal = None
    if len(roots) != 1:
        failures.append(f"expected a unique maximal element, found {len(roots)}")
    else:
        maximal = roots[0]

    # condition: parent-child edges form a perfect matching onto the child
    for child in traces:
        for parent in parents[child]:
            key = (min(parent, child), max(parent, child))
            edges = partition.inter_edges.get(key, [])
            cmembers = set(partition.members[child])
            if len(edges) != len(cmembers):
                failures.append(
                    f"boundary {parent!r} / {child!r} has {len(edges)} edges, "
                    f"child has {len(cmembers)} states"
                )
                continue
            touched = set()
            matched = True
            for i, j in edges:
                c = i if i in cmembers else j
                if c in touched:
                    matched = False
                    break
                touched.add(c)
            if not matched or touched != cmembers:
                failures.append(f"boundary {parent!r} / {child!r} is not a perfect matching onto the child")

    return TraceOrder(partition, smaller_is_ancestor, parents, children, maximal, not failures, failures)


def path_to_maximal(order: TraceOrder, trace) -> list:
    """Deterministic ascending chain from a trace to the maximal element."""
    path = [trace]
    cur = trace
    while order.parents[cur]:
        cur = order.parents[cur][0]
        path.append(cur)
    if cur != order.maximal:
        raise CertificationError(f"trace {trace!r} does not reach the maximal element")
    return path


def hierarchical_route(order: TraceOrder, ta, tb) -> list:
    """Class sequence ascending from ta to the least common meeting point, then down to tb."""
    up_a = path_to_maximal(order, ta)
    up_b = path_to_maximal(order, tb)
    pos = {t: i for i, t in enumerate(up_b)}
    meet_i = next(i for i, t in enumerate(up_a) if t in pos)
    route = up_a[: meet_i + 1] + list(reversed(up_b[: pos[up_a[meet_i]]]))
    return route


# ---------------------------------------------------------------------------
# subclass covers
# ---------------------------------------------------------------------------


@dataclass
class SubclassCover:
    trace: object
    labels: list
    members: dict                 # label -> sorted state indices
    certificates: dict            # label -> ProductCertificate
    multiplicity_max: int
    overlap: dict                 # (labelA, labelB) -> shared state count

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.certificates.values())


def subclass_labels_of_state(g: Graph, params: ChainParams, s, x, a, b, trace) -> list:
    """All subclass labels containing the given class member."""
    kind = params.kind
    xs = set(x)
    if kind == chains.KIND_BEC:
        deg_t = [0] * g.n
        for i in trace:
            u, v = g.edges[i]
            deg_t[u] += 1
            deg_t[v] += 1
        aset, bset = set(a), set(b)
        da, db = {}, {}
        for xv in x:
            da[xv] = sum(
                1
                for i in g.incident_edge_ids[xv]
                if (s >> i) & 1 and (g.edges[i][0] in aset or g.edges[i][1] in aset)
            )
            db[xv] = sum(
                1
                for i in g.incident_edge_ids[xv]
                if (s >> i) & 1 and (g.edges[i][0] in bset or g.edges[i][1] in bset)
            )
        choices = []
        for xv in x:
            resid = max(g.b(xv) - deg_t[xv], 0)
            lo = max(0, resid - db[xv])
            hi = min(resid, da[xv])
            choices.append(range(lo, hi + 1))
        return [tuple(c) for c in itertools.product(*choices)]

    if kind == chains.KIND_CSDS:
        u_set = sorted(undominated_separator_vertices(g, x, trace))
        aset, bset = set(a), set(b)
        options = []
        for uv in u_set:
            dom_a = any(((s >> w) & 1) for w in g.adjacency[uv] if w in aset)
            dom_b = any(((s >> w) & 1) for w in g.adjacency[uv] if w in bset)
            opts = []
            if dom_a:
                opts.append(True)   # uv assigned to the A side
            if dom_b:
                opts.append(False)
            if not opts:
                raise AssertionError(f"member leaves {uv} undominated")
            options.append(opts)
        labels = []
        for combo in itertools.product(*options):
            labels.append(tuple(uv for uv, in_a in zip(u_set, combo) if in_a))
        return labels

    if kind == chains.KIND_MIS:
        tset = set(trace)
        u_set = sorted(
            v for v in x
            if v not in tset and not any(u in tset for u in g.adjacency[v])
        )
        near = set()
        for uv in u_set:
            near.update(w for w in g.adjacency[uv] if w not in xs)
        near = sorted(near)
        chosen = [w for w in near if (s >> w) & 1]
        labels = []
        for r in range(1, len(chosen) + 1):
            for combo in itertools.combinations(chosen, r):
                if all(any(w in combo for w in g.adjacency[uv]) for uv in u_set):
                    labels.append(tuple(combo))
        if not u_set:
            labels = [()]
        return labels

    if kind == chains.KIND_MBM:
        incident = trace_edge_ids(g, chains.KIND_BM, x)  # all edges touching X
        return [tuple(i for i in incident if (s >> i) & 1)]

    raise ConfigurationError(f"{kind} does not use subclass covers")


def subclass_decompose(space: StateSpace, partition: ClassPartition, trace) -> SubclassCover:
    """Cover a class of a coupled chain with certified product subclasses."""
    g = space.graph
    params = space.params
    kind = params.kind
    if kind not in SUBCLASS_KINDS:
        raise ConfigurationError(f"{kind} classes certify directly; no subclass cover needed")
    x, a, b = partition.x, partition.side_a, partition.side_b

    if kind == chains.KIND_BEC:
        eff_b = [max(g.b(xv) - sum(1 for i in trace if xv in g.edges[i]), 0) for xv in x]
        if len(x) > MAX_BETA_SEPARATOR or any(bb > MAX_BETA_B for bb in eff_b):
            raise ConfigurationError(
                "beta-split enumeration supports residual b <= "
                f"{MAX_BETA_B} and |X| <= {MAX_BETA_SEPARATOR}"
            )

    members: dict = {}
    mult = 0
    for i in partition.members[trace]:
        labels = subclass_labels_of_state(g, params, space.states[i], x, a, b, trace)
        mult = max(mult, len(labels))
        for lab in labels:
            members.setdefault(lab, []).append(i)

    labels = sorted(members)
    certificates = {}
    for lab in labels:
        certificates[lab] = certify_cartesian_product(space, partition, trace, members[lab], lab)

    overlap = {}
    sets = {lab: set(members[lab]) for lab in labels}
    for la, lb in itertools.combinations(labels, 2):
        shared = len(sets[la] & sets[lb])
        if shared:
            overlap[(la, lb)] = shared

    union = set()
    for lab in labels:
        union.update(members[lab])
    if union != set(partition.members[trace]):
        raise CertificationError(f"subclasses do not cover class {trace!r}")

    return SubclassCover(trace, labels, members, certificates, mult, overlap)


# ---------------------------------------------------------------------------
# framework condition reports
# ---------------------------------------------------------------------------


@dataclass
class ConditionReport:
    variant: str
    checks: list                 # (name, passed or None, measured)

    @property
    def ok(self) -> bool:
        return all(p is not False for _, p, _ in self.checks)

    def lines(self) -> list[str]:
        out = []
        for name, passed, measured in self.checks:
            status = "pass" if passed else ("FAIL" if passed is False else "info")
            out.append(f"[{status}] {name}: {measured}")
        return out


def verify_framework_conditions(
    space: StateSpace,
    partition: ClassPartition,
    variant: str,
    order: Optional[TraceOrder] = None,
    covers: Optional[dict] = None,
) -> ConditionReport:
    """Measure the decomposition constants behind each framework condition.

    Asymptotic conditions are reported as concrete measured ratios; only the
    exact structural facts (partition exactness, matching boundaries, order
    conditions) carry a pass/fail verdict.
    """
    if variant not in ("nonhier", "hier", "relaxed_hier", "relaxed_nonhier"):
        raise ValueError(f"unknown variant {variant!r}")
    checks = []
    sizes = {t: len(m) for t, m in partition.members.items()}
    total = sum(sizes.values())
    checks.append((
        "partition is exact",
        total == space.n_states,
        {"sum_class_sizes": total, "states": space.n_states},
    ))
    checks.append((
        "class count",
        None,
        {"K": partition.num_classes, "|X|": len(partition.x)},
    ))
    if sizes:
        checks.append((
            "class size ratio",
            None,
            {"max": max(sizes.values()), "min": min(sizes.values()),
             "ratio": max(sizes.values()) / min(sizes.values())},
        ))

    # per-state degree into any single other class
    per_vertex = 0
    for (ta, tb), edges in partition.inter_edges.items():
        count: dict = {}
        for i, j in edges:
            count[(i, tb)] = count.get((i, tb), 0) + 1
            count[(j, ta)] = count.get((j, ta), 0) + 1
        if count:
            per_vertex = max(per_vertex, max(count.values()))
    checks.append(("max state degree into one class", None, {"degree": per_vertex}))

    bfr = []
    for (ta, tb), edges in partition.inter_edges.items():
        m = min(sizes[ta], sizes[tb])
        bfr.append(len(edges) / m if m else 0.0)
    checks.append((
        "boundary edges / min class size",
        None,
        {"min": min(bfr) if bfr else None, "max": max(bfr) if bfr else None},
    ))

    if variant in ("hier", "relaxed_hier"):
        if order is None:
            order = build_trace_order(partition)
        checks.append((
            "order: sizes monotone, unique maximal, matching boundaries",
            order.ok,
            {"failures": order.failures[:3], "maximal": order.maximal},
        ))
    if variant in ("relaxed_hier", "relaxed_nonhier"):
        if covers is None:
            covers = {t: subclass_decompose(space, partition, t) for t in partition.traces}
        all_ok = all(c.ok for c in covers.values())
        mult = max(c.multiplicity_max for c in covers.values())
        fracs = []
        for c in covers.values():
            for (la, lb), shared in c.overlap.items():
                fracs.append(shared / min(len(c.members[la]), len(c.members[lb])))
        checks.append((
            "subclass covers certify",
            all_ok,
            {"max_multiplicity": mult,
             "min_overlap_fraction": min(fracs) if fracs else None},
        ))
    return ConditionReport(variant, checks)


def weight_factorization_residual(space: StateSpace, cert: ProductCertificate) -> float:
    """Worst residual of the stationary-weight product identities on a class.

    For a certified class (or subclass) with factor chains A and B and
    proposal normalizers R_A, R_B, R:
      vertex weights:  pi(s) = pi_A(s_A) * pi_B(s_B) * pi(class), and
      edge weights:    Q(e)  = Q_class(e) * pi(class) * (R_A + R_B) / R,
    where Q_class composes the factor edge weights with the product-chain
    degree split R_A / (R_A + R_B).  Both identities are exact for every
    chain under the uniform-proposal normalization; the residual measures
    only float roundoff.
    """
    if not cert.ok:
        raise CertificationError("identities are defined only for certified classes")
    sa, sb = cert.space_a, cert.space_b
    pi = space.stationary()
    pi_a, pi_b = sa.stationary(), sb.stationary()
    class_mass = float(sum(pi[i] for i in cert.member_indices))
    worst = 0.0
    for i in cert.member_indices:
        ia, ib = cert.bijection[i]
        worst = max(worst, abs(pi[i] - pi_a[ia] * pi_b[ib] * class_mass))

    ra, rb, rg = sa.normalizer, sb.normalizer, space.normalizer
    members = set(cert.member_indices)
    for (i, j) in space.edges:
        if i not in members or j not in members:
            continue
        (ia, ib), (ja, jb) = cert.bijection[i], cert.bijection[j]
        q_g = pi[i] * space.transition[i, j]
        if ia != ja:
            q_factor = pi_a[ia] * sa.transition[ia, ja]
            q_class = pi_b[ib] * ra * q_factor / (ra + rb)
        else:
            q_factor = pi_b[ib] * sb.transition[ib, jb]
            q_class = pi_a[ia] * rb * q_factor / (ra + rb)
        worst = max(worst, abs(q_g - q_class * class_mass * (ra + rb) / rg))
    return worst


def format_partition_report(partition: ClassPartition, report: Optional[ConditionReport] = None) -> str:
    lines = [
        f"separator X = {partition.x}",
        f"sides |A| = {len(partition.side_a)}, |B| = {len(partition.side_b)}",
        f"classes: {partition.num_classes}",
    ]
    for t in partition.traces:
        lines.append(f"  class {t!r}: size {len(partition.members[t])}")
    for (ta, tb), edges in sorted(partition.inter_edges.items()):
        lines.append(f"  boundary {ta!r} -- {tb!r}: {len(edges)} edges")
    if report is not None:
        lines.append(f"conditions ({report.variant}):")
        lines.extend("  " + l for l in report.lines())
    return "\n".join(lines) + "\n"
