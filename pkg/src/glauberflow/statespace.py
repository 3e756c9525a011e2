"""Explicit state graphs at desk scale, plus the exact oracles.

A StateSpace materializes every valid state of a dynamics, the move edges
between them, the stationary weights lambda^|s|, and the one-step transition
matrix.  On top of it sit brute-force oracles: connectivity, the exact
stationary distribution, exact edge expansion and conductance by cut
enumeration, and exact total-variation mixing curves by matrix powers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from . import chains
from .chains import ChainParams
from .graphs import Graph, make_graph

DEFAULT_STATE_CAP = 200_000
DEFAULT_EXACT_CAP = 2_000
DEFAULT_CUT_LIMIT = 22


class StateCapExceeded(RuntimeError):
    def __init__(self, cap: int):
        super().__init__(f"state count exceeds the cap of {cap}; instance too large for exact mode")
        self.cap = cap


def enumerate_states(g: Graph, params: ChainParams, cap: int = DEFAULT_STATE_CAP) -> list:
    """All valid states in canonical (payload-ascending) order."""
    kind = params.kind
    chains.validate_params(g, params)
    if kind == chains.KIND_IS:
        out = _enum_independent(g, cap)
    elif kind == chains.KIND_MIS:
        out = [s for s in _enum_independent(g, cap) if chains.is_valid_state(g, params, s)]
    elif kind == chains.KIND_CSDS:
        out = _enum_filter_vertex_masks(g, params, cap)
    elif kind == chains.KIND_BM:
        out = _enum_b_matchings(g, cap)
    elif kind == chains.KIND_MBM:
        out = [s for s in _enum_b_matchings(g, cap) if chains.is_valid_state(g, params, s)]
    elif kind == chains.KIND_BEC:
        out = _enum_b_edge_covers(g, cap)
    elif kind in chains.COLORING_KINDS:
        out = _enum_colorings(g, params, cap, allow_blank=kind == chains.KIND_PCOL)
    else:
        raise AssertionError(kind)
    out.sort()
    return out


def _enum_independent(g: Graph, cap: int) -> list[int]:
    out: list[int] = []
    nbr = g.neighbor_masks

    def rec(v: int, mask: int):
        if v == g.n:
            if len(out) >= cap:
                raise StateCapExceeded(cap)
            out.append(mask)
            return
        rec(v + 1, mask)
        if not (nbr[v] & mask):
            rec(v + 1, mask | (1 << v))

    rec(0, 0)
    return out


def _enum_filter_vertex_masks(g: Graph, params: ChainParams, cap: int) -> list[int]:
    if g.n > 24:
        raise StateCapExceeded(cap)
    out = []
    for mask in range(1 << g.n):
        if chains.is_valid_state(g, params, mask):
            if len(out) >= cap:
                raise StateCapExceeded(cap)
            out.append(mask)
    return out


def _enum_b_matchings(g: Graph, cap: int) -> list[int]:
    out: list[int] = []
    deg = [0] * g.n

    def rec(i: int, mask: int):
        if i == g.m:
            if len(out) >= cap:
                raise StateCapExceeded(cap)
            out.append(mask)
            return
        rec(i + 1, mask)
        u, v = g.edges[i]
        if deg[u] < g.b(u) and deg[v] < g.b(v):
            deg[u] += 1
            deg[v] += 1
            rec(i + 1, mask | (1 << i))
            deg[u] -= 1
            deg[v] -= 1

    rec(0, 0)
    return out


def _enum_b_edge_covers(g: Graph, cap: int) -> list[int]:
    out: list[int] = []
    deg = [0] * g.n
    remaining = [g.degree(v) for v in range(g.n)]

    def rec(i: int, mask: int):
        if i == g.m:
            if all(deg[v] >= g.b(v) for v in range(g.n)):
                if len(out) >= cap:
                    raise StateCapExceeded(cap)
                out.append(mask)
            return
        u, v = g.edges[i]
        remaining[u] -= 1
        remaining[v] -= 1
        # exclude edge i only if both endpoints can still reach their floor
        if deg[u] + remaining[u] >= g.b(u) and deg[v] + remaining[v] >= g.b(v):
            rec(i + 1, mask)
        deg[u] += 1
        deg[v] += 1
        rec(i + 1, mask | (1 << i))
        deg[u] -= 1
        deg[v] -= 1
        remaining[u] += 1
        remaining[v] += 1

    rec(0, 0)
    return out


def _enum_colorings(g: Graph, params: ChainParams, cap: int, allow_blank: bool) -> list[tuple]:
    out: list[tuple] = []
    assign = [0] * g.n
    lists = [sorted(g.color_list(v, params.q)) for v in range(g.n)]

    def rec(v: int):
        if v == g.n:
            if len(out) >= cap:
                raise StateCapExceeded(cap)
            out.append(tuple(assign))
            return
        if allow_blank:
            assign[v] = 0
            rec(v + 1)
        used = {assign[u] for u in g.adjacency[v] if u < v}
        for c in lists[v]:
            if c not in used:
                assign[v] = c
                rec(v + 1)
        assign[v] = 0

    rec(0)
    return out


@dataclass
class StateSpace:
    """Explicit move graph of one dynamics on one underlying graph."""

    graph: Graph
    params: ChainParams
    states: list
    index: dict
    edges: list[tuple[int, int]]          # i < j
    edge_tags: list[tuple[str, str]]      # tag of i->j and of j->i
    adjacency: list[list[int]]
    weights: np.ndarray                   # unnormalized stationary weights
    log_weights: np.ndarray
    zsum: float                           # normalizer sum(weights)
    delta_m: int                          # true maximum state degree
    normalizer: float                     # proposal normalizer used in P
    transition: sp.csr_matrix

    @property
    def n_states(self) -> int:
        return len(self.states)

    def stationary(self) -> np.ndarray:
        return self.weights / self.zsum

    def neighbor_masks_of_states(self) -> list[int]:
        masks = [0] * self.n_states
        for i, j in self.edges:
            masks[i] |= 1 << j
            masks[j] |= 1 << i
        return masks

    def edge_weight(self, i: int, j: int) -> float:
        """Q(i, j) = pi(i) P(i, j), symmetric by detailed balance."""
        return (self.weights[i] / self.zsum) * self.transition[i, j]

    def kernel_weight(self, i: int, j: int) -> float:
        """Proposal-free edge kernel pi(i) A(i, j); the normalizer cancels."""
        return self.edge_weight(i, j) * self.normalizer


def build_state_space(g: Graph, params: ChainParams, cap: int = DEFAULT_STATE_CAP) -> StateSpace:
    states = enumerate_states(g, params, cap)
    index = {s: i for i, s in enumerate(states)}
    n = len(states)

    edges = []
    edge_tags = []
    adjacency: list[list[int]] = [[] for _ in range(n)]
    out_moves: list[list[tuple[int, str]]] = [[] for _ in range(n)]
    for i, s in enumerate(states):
        for t, tag in chains.enumerate_moves(g, params, s):
            j = index.get(t)
            if j is None:
                raise AssertionError("move target is not a valid state (validity closure broken)")
            out_moves[i].append((j, tag))
    for i in range(n):
        for j, tag in out_moves[i]:
            if j > i:
                back = [tg for (jj, tg) in out_moves[j] if jj == i]
                if len(back) != 1:
                    raise AssertionError("move relation is not symmetric")
                edges.append((i, j))
                edge_tags.append((tag, back[0]))
                adjacency[i].append(j)
                adjacency[j].append(i)

    delta_m = max((len(mv) for mv in out_moves), default=0)
    norm = chains.proposal_normalizer(g, params, delta_m)

    weights = np.array([chains.unnormalized_weight(params, s) for s in states], dtype=float)
    logw = np.array([chains.log_weight(params, s) for s in states], dtype=float)
    zsum = math.fsum(weights.tolist()) if n else 0.0

    rows, cols, vals = [], [], []
    for i in range(n):
        total = 0.0
        for j, tag in out_moves[i]:
            p = chains.move_probability(params, tag, norm)
            rows.append(i)
            cols.append(j)
            vals.append(p)
            total += p
        rows.append(i)
        cols.append(i)
        vals.append(1.0 - total)
    transition = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    return StateSpace(
        graph=g,
        params=params,
        states=states,
        index=index,
        edges=edges,
        edge_tags=edge_tags,
        adjacency=adjacency,
        weights=weights,
        log_weights=logw,
        zsum=zsum,
        delta_m=delta_m,
        normalizer=norm,
        transition=transition,
    )


def check_connectivity(space: StateSpace) -> tuple[bool, Optional[tuple]]:
    """BFS from the first state; on failure returns two unreachable states."""
    n = space.n_states
    if n <= 1:
        return True, None
    seen = [False] * n
    seen[0] = True
    stack = [0]
    count = 1
    while stack:
        i = stack.pop()
        for j in space.adjacency[i]:
            if not seen[j]:
                seen[j] = True
                count += 1
                stack.append(j)
    if count == n:
        return True, None
    stranded = next(i for i in range(n) if not seen[i])
    return False, (space.states[0], space.states[stranded])


def detailed_balance_residual(space: StateSpace) -> float:
    """max |pi(i) P(i,j) - pi(j) P(j,i)| over all state pairs."""
    pi = space.stationary()
    q = space.transition.multiply(pi[:, None]).tocsr()
    diff = abs(q - q.T)
    return float(diff.max()) if diff.nnz else 0.0


def exact_stationary(space: StateSpace, residual_tol: float = 1e-10) -> np.ndarray:
    """pi = weights / Z, verified as a fixed point of the transition matrix."""
    ok, witness = check_connectivity(space)
    if not ok:
        raise ValueError(f"state graph is disconnected, e.g. {witness[0]!r} vs {witness[1]!r}")
    pi = space.stationary()
    residual = np.abs(pi @ space.transition - pi).max()
    if residual > residual_tol:
        raise AssertionError(f"stationary fixed-point residual {residual:.3e} above {residual_tol}")
    return pi


# ---------------------------------------------------------------------------
# exact cut oracles
# ---------------------------------------------------------------------------


def exact_expansion(obj: Union[StateSpace, Graph, Sequence[int]], limit: int = DEFAULT_CUT_LIMIT) -> Fraction:
    """Exact edge expansion: min over cuts with |S| <= |V|/2 of cut(S)/|S|.

    Accepts a StateSpace, a Graph, or a sequence of neighbor bitmasks.
    Enumerates all 2^N subsets in Gray-code order, so N is capped by limit.
    """
    if isinstance(obj, StateSpace):
        masks = obj.neighbor_masks_of_states()
    elif isinstance(obj, Graph):
        masks = list(obj.neighbor_masks)
    else:
        masks = list(obj)
    n = len(masks)
    if n > limit:
        raise ValueError(f"{n} vertices exceeds the cut-enumeration limit {limit}")
    if n <= 1:
        raise ValueError("expansion needs at least two vertices")
    deg = [m.bit_count() for m in masks]

    best = None
    cur = 0
    size = 0
    cut = 0
    half = n // 2
    for i in range(1, 1 << n):
        v = (i & -i).bit_length() - 1
        bit = 1 << v
        if cur & bit:
            inside = (masks[v] & cur).bit_count()  # v still in cur
            cut += 2 * inside - deg[v]
            cur &= ~bit
            size -= 1
        else:
            inside = (masks[v] & cur).bit_count()
            cut += deg[v] - 2 * inside
            cur |= bit
            size += 1
        if 1 <= size <= half:
            q = Fraction(cut, size)
            if best is None or q < best:
                best = q
    return best


def exact_conductance(space: StateSpace, limit: int = DEFAULT_CUT_LIMIT) -> Fraction:
    """Exact conductance min Q(S, comp)/pi(S) over 0 < pi(S) <= 1/2.

    All arithmetic is exact over rationals: weights are lambda^|s| and the
    transition entries are ratios of the same quantities, so no float drift
    enters the minimum.
    """
    n = space.n_states
    if n > limit:
        raise ValueError(f"{n} states exceeds the cut-enumeration limit {limit}")
    if n <= 1:
        raise ValueError("conductance needs at least two states")
    lam = Fraction(space.params.lam)
    wts = [
        lam ** chains.state_size(space.params, s) if space.params.kind not in chains.UNIFORM_KINDS else Fraction(1)
        for s in space.states
    ]
    ztot = sum(wts)
    norm = Fraction(space.normalizer)

    # symmetric edge kernel Q(i, j) as exact rationals
    qmat: list[dict[int, Fraction]] = [dict() for _ in range(n)]
    for (i, j), (tag_ij, _) in zip(space.edges, space.edge_tags):
        p = _move_probability_exact(space.params, tag_ij, norm, lam)
        q = wts[i] * p
        qmat[i][j] = q
        qmat[j][i] = q

    best = None
    cur = 0
    pisum = Fraction(0)
    qcut = Fraction(0)
    for idx in range(1, 1 << n):
        v = (idx & -idx).bit_length() - 1
        bit = 1 << v
        if cur & bit:
            cur &= ~bit
            pisum -= wts[v]
            for u, q in qmat[v].items():
                qcut += q if (cur >> u) & 1 else -q
        else:
            cur |= bit
            pisum += wts[v]
            for u, q in qmat[v].items():
                qcut -= q if (cur >> u) & 1 else -q
        if 0 < pisum * 2 <= ztot:
            ratio = qcut / pisum
            if best is None or ratio < best:
                best = ratio
    return best


def _move_probability_exact(params: ChainParams, tag: str, norm: Fraction, lam: Fraction) -> Fraction:
    if params.kind in chains.MAXIMAL_KINDS:
        return 1 / norm
    if params.kind == chains.KIND_COL:
        return Fraction(1, 2) / norm
    if tag in ("add", "recolor"):
        return lam / (norm * (lam + 1))
    if tag == "drop":
        return 1 / (norm * (lam + 1))
    raise ValueError(tag)


# ---------------------------------------------------------------------------
# mixing oracles
# ---------------------------------------------------------------------------


def distribution_evolution(space: StateSpace, start: int, t_max: int, monotone_tol: float = 1e-12) -> list[float]:
    """Total-variation distance to stationarity after t = 0..t_max steps."""
    if t_max < 0:
        raise ValueError("t_max must be nonnegative")
    pi = exact_stationary(space)
    pt = sp.csr_matrix(space.transition.T)
    dist = np.zeros(space.n_states)
    dist[start] = 1.0
    out = []
    prev = None
    for _ in range(t_max + 1):
        tv = 0.5 * float(np.abs(dist - pi).sum())
        if prev is not None and tv > prev + monotone_tol:
            raise AssertionError(f"TV increased from {prev} to {tv}; lazy chain should be monotone")
        out.append(tv)
        prev = tv
        dist = pt @ dist
    return out


def exact_mixing_time(
    space: StateSpace,
    epsilon: float = 0.25,
    cap: int = DEFAULT_EXACT_CAP,
    t_max: int = 1_000_000,
) -> int:
    """Smallest t with worst-start TV strictly below epsilon."""
    n = space.n_states
    if n > cap:
        raise ValueError(f"{n} states exceeds the matrix-power cap {cap}")
    if n == 1:
        return 0
    pi = exact_stationary(space)
    pt = sp.csr_matrix(space.transition.T)
    dist = np.eye(n)
    t = 0
    while t <= t_max:
        worst = 0.5 * float(np.abs(dist - pi[:, None]).sum(axis=0).max())
        if worst < epsilon:
            return t
        dist = pt @ dist
        t += 1
    raise RuntimeError(f"chain did not mix within {t_max} steps")


# ---------------------------------------------------------------------------
# dump format (JSON): graph, params, states as hex payloads, edges, weights
# ---------------------------------------------------------------------------


def _state_to_json(params: ChainParams, s):
    if params.kind in chains.COLORING_KINDS:
        return list(s)
    return hex(s)


def _state_from_json(params: ChainParams, obj):
    if params.kind in chains.COLORING_KINDS:
        return tuple(obj)
    return int(obj, 16)


def dump_space(space: StateSpace) -> str:
    payload = {
        "format": "glauberflow-space-1",
        "graph": {
            "n": space.graph.n,
            "edges": [list(e) for e in space.graph.edges],
            "b_values": list(space.graph.b_values) if space.graph.b_values else None,
            "roles": list(space.graph.roles) if space.graph.roles else None,
            "color_lists": [sorted(l) for l in space.graph.color_lists] if space.graph.color_lists else None,
        },
        "params": {"kind": space.params.kind, "lam": space.params.lam, "q": space.params.q},
        "states": [_state_to_json(space.params, s) for s in space.states],
        "edges": [list(e) for e in space.edges],
        "weights": [float(w) for w in space.weights],
        "delta_m": space.delta_m,
        "normalizer": space.normalizer,
    }
    return json.dumps(payload, indent=1)


def load_space(text: str) -> StateSpace:
    """Rebuild a StateSpace from a dump, verifying the stored skeleton."""
    payload = json.loads(text)
    if payload.get("format") != "glauberflow-space-1":
        raise ValueError("not a state-space dump")
    gd = payload["graph"]
    g = make_graph(
        gd["n"],
        [tuple(e) for e in gd["edges"]],
        b_values=tuple(gd["b_values"]) if gd.get("b_values") else None,
        roles=tuple(gd["roles"]) if gd.get("roles") else None,
        color_lists=tuple(frozenset(l) for l in gd["color_lists"]) if gd.get("color_lists") else None,
    )
    params = ChainParams(**payload["params"])
    space = build_state_space(g, params)
    stored = [_state_from_json(params, s) for s in payload["states"]]
    if stored != space.states:
        raise ValueError("dump states disagree with a fresh enumeration")
    if [list(e) for e in space.edges] != payload["edges"]:
        raise ValueError("dump edges disagree with a fresh build")
    return space
