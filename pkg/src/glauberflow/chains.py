"""Semantics of the eight single-site dynamics.

A state is a plain payload: an int bitmask over vertices (independent sets,
dominating sets, maximal independent sets), an int bitmask over edges
(b-matchings, b-edge covers, maximal b-matchings), or a tuple of per-vertex
values with 0 meaning uncolored (complete and partial colorings).

Every chain exposes validity, move enumeration with add/drop/recolor tags,
state weights lambda^|state|, and single-move transition probabilities.  The
transition matrix uses the uniform-proposal normalizer of each dynamics
(n for vertex chains, m for edge chains, n(q+1) for partial colorings,
n(q-1) for complete colorings, 2*Delta_M for the maximal-set walks), which
keeps detailed balance exact and matches the step-by-step simulators.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional

from .graphs import Graph, ROLE_FORBIDDEN, ROLE_NORMAL, ROLE_STEINER

KIND_IS = "independent_set"
KIND_COL = "q_coloring"
KIND_PCOL = "partial_q_coloring"
KIND_BEC = "b_edge_cover"
KIND_BM = "b_matching"
KIND_CSDS = "csds"
KIND_MIS = "maximal_independent_set"
KIND_MBM = "maximal_b_matching"

KINDS = (KIND_IS, KIND_COL, KIND_PCOL, KIND_BEC, KIND_BM, KIND_CSDS, KIND_MIS, KIND_MBM)

VERTEX_SUBSET_KINDS = (KIND_IS, KIND_CSDS, KIND_MIS)
EDGE_SUBSET_KINDS = (KIND_BEC, KIND_BM, KIND_MBM)
COLORING_KINDS = (KIND_COL, KIND_PCOL)
MAXIMAL_KINDS = (KIND_MIS, KIND_MBM)
UNIFORM_KINDS = (KIND_COL, KIND_MIS, KIND_MBM)  # lambda is ignored

MAX_DEGREE_FOR_MAXIMAL = 6


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class ChainParams:
    kind: str
    lam: float = 1.0
    q: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown chain kind {self.kind!r}")
        if self.lam <= 0:
            raise ConfigurationError("lambda must be positive")
        if self.kind in COLORING_KINDS and self.q < 1:
            raise ConfigurationError("coloring chains need q >= 1")


def validate_params(g: Graph, params: ChainParams) -> None:
    if params.kind in MAXIMAL_KINDS and g.max_degree > MAX_DEGREE_FOR_MAXIMAL:
        raise ConfigurationError(
            f"maximal-set moves are enumerated exhaustively; degree "
            f"{g.max_degree} exceeds the supported bound {MAX_DEGREE_FOR_MAXIMAL}"
        )
    if params.kind in COLORING_KINDS and g.color_lists is not None:
        for v, lst in enumerate(g.color_lists):
            if any(c > params.q for c in lst):
                raise ConfigurationError(f"vertex {v} lists a color above q={params.q}")


def state_size(params: ChainParams, s) -> int:
    if params.kind in COLORING_KINDS:
        return sum(1 for c in s if c != 0)
    return int(s).bit_count()


def unnormalized_weight(params: ChainParams, s) -> float:
    """lambda^|s| for the biased chains; 1 for the uniform ones."""
    if params.kind in UNIFORM_KINDS:
        return 1.0
    return float(params.lam) ** state_size(params, s)


def log_weight(params: ChainParams, s) -> float:
    import math

    if params.kind in UNIFORM_KINDS:
        return 0.0
    return state_size(params, s) * math.log(params.lam)


# ---------------------------------------------------------------------------
# validity
# ---------------------------------------------------------------------------


def is_valid_state(g: Graph, params: ChainParams, s) -> bool:
    kind = params.kind
    if kind == KIND_IS:
        return _is_independent(g, s)
    if kind == KIND_MIS:
        return _is_independent(g, s) and _is_maximal_is(g, s)
    if kind == KIND_CSDS:
        return _is_csds(g, s)
    if kind == KIND_BM:
        return _degrees_within(g, s, upper=True)
    if kind == KIND_BEC:
        return _degrees_within(g, s, upper=False)
    if kind == KIND_MBM:
        return (
            _degrees_within(g, s, upper=True)
            and _is_maximal_bm(g, s)
            and _saturation_flags_ok(g, s)
        )
    if kind == KIND_COL:
        return _is_coloring(g, params, s, allow_blank=False)
    if kind == KIND_PCOL:
        return _is_coloring(g, params, s, allow_blank=True)
    raise AssertionError(kind)


def _is_independent(g: Graph, s: int) -> bool:
    m = s
    while m:
        v = (m & -m).bit_length() - 1
        if g.neighbor_masks[v] & s:
            return False
        m &= m - 1
    return True


def _is_maximal_is(g: Graph, s: int) -> bool:
    for v in range(g.n):
        if not (s >> v) & 1 and not (g.neighbor_masks[v] & s):
            return False
    return True


def _is_csds(g: Graph, s: int) -> bool:
    for v in range(g.n):
        role = g.role(v)
        selected = (s >> v) & 1
        if role == ROLE_FORBIDDEN and selected:
            return False
        if role in (ROLE_NORMAL, ROLE_FORBIDDEN):
            if not selected and not (g.neighbor_masks[v] & s):
                return False
    return True


def _edge_degrees(g: Graph, s: int) -> list[int]:
    deg = [0] * g.n
    m = s
    while m:
        i = (m & -m).bit_length() - 1
        u, v = g.edges[i]
        deg[u] += 1
        deg[v] += 1
        m &= m - 1
    return deg


def _degrees_within(g: Graph, s: int, upper: bool) -> bool:
    deg = _edge_degrees(g, s)
    if upper:
        return all(deg[v] <= g.b(v) for v in range(g.n))
    return all(deg[v] >= g.b(v) for v in range(g.n))


def _is_maximal_bm(g: Graph, s: int) -> bool:
    deg = _edge_degrees(g, s)
    sat = [deg[v] >= g.b(v) for v in range(g.n)]
    for i, (u, v) in enumerate(g.edges):
        if not (s >> i) & 1 and not sat[u] and not sat[v]:
            return False
    return True


def _saturation_flags_ok(g: Graph, s: int) -> bool:
    if g.must_saturate is None:
        return True
    deg = _edge_degrees(g, s)
    return all(deg[v] >= g.b(v) for v in range(g.n) if g.must_saturate[v])


def _is_coloring(g: Graph, params: ChainParams, s, allow_blank: bool) -> bool:
    if len(s) != g.n:
        return False
    for v, c in enumerate(s):
        if c == 0:
            if not allow_blank:
                return False
            continue
        if c not in g.color_list(v, params.q):
            return False
    for u, v in g.edges:
        if s[u] != 0 and s[u] == s[v]:
            return False
    return True


# ---------------------------------------------------------------------------
# moves
# ---------------------------------------------------------------------------


def enumerate_moves(g: Graph, params: ChainParams, s) -> list[tuple[object, str]]:
    """All states one move away from s, tagged add/drop/recolor/uniform.

    The move relation is symmetric for every chain; for the maximal-set
    chains both orientations of the composite moves are enumerated, so
    s' in moves(s) iff s in moves(s').
    """
    kind = params.kind
    if kind == KIND_IS:
        return _moves_independent(g, s)
    if kind == KIND_CSDS:
        return _moves_csds(g, s)
    if kind == KIND_BM:
        return _moves_edge(g, s, upper=True)
    if kind == KIND_BEC:
        return _moves_edge(g, s, upper=False)
    if kind == KIND_COL:
        return _moves_coloring(g, params, s)
    if kind == KIND_PCOL:
        return _moves_partial_coloring(g, params, s)
    if kind == KIND_MIS:
        return [(t, "uniform") for t in _moves_maximal_is(g, s)]
    if kind == KIND_MBM:
        return [(t, "uniform") for t in _moves_maximal_bm(g, s)]
    raise AssertionError(kind)


def _moves_independent(g: Graph, s: int) -> list[tuple[int, str]]:
    out = []
    for v in range(g.n):
        bit = 1 << v
        if s & bit:
            out.append((s & ~bit, "drop"))
        elif not (g.neighbor_masks[v] & s):
            out.append((s | bit, "add"))
    return out


def _moves_csds(g: Graph, s: int) -> list[tuple[int, str]]:
    out = []
    for v in range(g.n):
        bit = 1 << v
        if s & bit:
            t = s & ~bit
            if _is_csds(g, t):
                out.append((t, "drop"))
        elif g.role(v) != ROLE_FORBIDDEN:
            out.append((s | bit, "add"))
    return out


def _moves_edge(g: Graph, s: int, upper: bool) -> list[tuple[int, str]]:
    deg = _edge_degrees(g, s)
    out = []
    for i, (u, v) in enumerate(g.edges):
        bit = 1 << i
        if s & bit:
            if upper:
                out.append((s & ~bit, "drop"))
            elif deg[u] > g.b(u) and deg[v] > g.b(v):
                out.append((s & ~bit, "drop"))
        else:
            if upper:
                if deg[u] < g.b(u) and deg[v] < g.b(v):
                    out.append((s | bit, "add"))
            else:
                out.append((s | bit, "add"))
    return out


def _moves_coloring(g: Graph, params: ChainParams, s) -> list[tuple[tuple, str]]:
    out = []
    for v in range(g.n):
        used = {s[u] for u in g.adjacency[v]}
        for c in sorted(g.color_list(v, params.q)):
            if c != s[v] and c not in used:
                t = list(s)
                t[v] = c
                out.append((tuple(t), "recolor"))
    return out


def _moves_partial_coloring(g: Graph, params: ChainParams, s) -> list[tuple[tuple, str]]:
    out = []
    for v in range(g.n):
        used = {s[u] for u in g.adjacency[v]}
        if s[v] != 0:
            t = list(s)
            t[v] = 0
            out.append((tuple(t), "drop"))
        for c in sorted(g.color_list(v, params.q)):
            if c != s[v] and c not in used:
                t = list(s)
                t[v] = c
                out.append((tuple(t), "add" if s[v] == 0 else "recolor"))
    return out


def _dist2_sets(g: Graph) -> tuple[int, ...]:
    out = []
    for v in range(g.n):
        reach = 0
        for u in g.adjacency[v]:
            reach |= g.neighbor_masks[u]
        out.append(reach & ~g.neighbor_masks[v] & ~(1 << v))
    return tuple(out)


def _mask_subsets(mask: int) -> Iterable[int]:
    """All submasks of mask, including 0 and mask itself."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def _moves_maximal_is(g: Graph, s: int) -> list[int]:
    if g.max_degree > MAX_DEGREE_FOR_MAXIMAL:
        raise ConfigurationError(
            f"degree {g.max_degree} exceeds the exhaustive-enumeration bound"
        )
    dist2 = _dist2_sets(g)
    found: set[int] = set()
    # forward: add v, drop its selected neighbors, add a set at distance two
    for v in range(g.n):
        bit = 1 << v
        if s & bit:
            continue
        base = (s & ~g.neighbor_masks[v]) | bit
        free = dist2[v] & ~s
        for d in _mask_subsets(free):
            cand = base | d
            if cand != s and _is_independent(g, cand) and _is_maximal_is(g, cand):
                found.add(cand)
    # reverse: drop v and some distance-two vertices, restore neighbors
    for v in range(g.n):
        bit = 1 << v
        if not s & bit:
            continue
        for d in _mask_subsets(dist2[v] & s):
            stripped = s & ~(bit | d)
            for r in _mask_subsets(g.neighbor_masks[v]):
                cand = stripped | r
                if cand != s and _is_independent(g, cand) and _is_maximal_is(g, cand):
                    found.add(cand)
    return sorted(found)


def _moves_maximal_bm(g: Graph, s: int) -> list[int]:
    if g.max_degree > MAX_DEGREE_FOR_MAXIMAL:
        raise ConfigurationError(
            f"degree {g.max_degree} exceeds the exhaustive-enumeration bound"
        )
    inc = g.incident_edge_ids
    found: set[int] = set()

    def halo(u: int, v: int) -> int:
        # edges incident to a neighbor of u or v (includes edges at u, v)
        mask = 0
        for w in set(g.adjacency[u]) | set(g.adjacency[v]):
            for i in inc[w]:
                mask |= 1 << i
        return mask

    def valid(t: int) -> bool:
        return (
            _degrees_within(g, t, upper=True)
            and _is_maximal_bm(g, t)
            and _saturation_flags_ok(g, t)
        )

    for i, (u, v) in enumerate(g.edges):
        ebit = 1 << i
        near = 0
        for j in set(inc[u]) | set(inc[v]):
            near |= 1 << j
        if not s & ebit:
            # forward: add edge i, drop conflicting incident edges, re-add nearby
            for rem in _mask_subsets(s & near & ~ebit):
                s1 = (s & ~rem) | ebit
                if not _degrees_within(g, s1, upper=True):
                    continue
                addable = halo(u, v) & ~s1
                for add in _mask_subsets(addable):
                    cand = s1 | add
                    if cand != s and valid(cand):
                        found.add(cand)
        else:
            # reverse: drop edge i and some nearby edges, restore incident ones
            for add in _mask_subsets(s & halo(u, v) & ~ebit):
                stripped = s & ~(ebit | add)
                for rem in _mask_subsets(near & ~s & ~ebit):
                    cand = stripped | rem
                    if cand != s and valid(cand):
                        found.add(cand)
    return sorted(found)


# ---------------------------------------------------------------------------
# transition probabilities
# ---------------------------------------------------------------------------


def analytic_degree_bound(g: Graph, params: ChainParams) -> int:
    """Upper bound on the move count of any state, without enumeration."""
    kind = params.kind
    d = g.max_degree
    if kind == KIND_MIS:
        return g.n * 2 ** (d * d + d)
    if kind == KIND_MBM:
        return g.m * 2 ** (2 * d * (d + 1) + 1)
    if kind in EDGE_SUBSET_KINDS:
        return g.m
    if kind == KIND_PCOL:
        return g.n * params.q
    if kind == KIND_COL:
        return g.n * max(params.q - 1, 0)
    return g.n


def proposal_normalizer(g: Graph, params: ChainParams, delta_m: Optional[int] = None) -> float:
    """Normalizer of the single-step proposal distribution.

    For the maximal-set walks the chain is defined through the state graph's
    maximum degree, so delta_m must be supplied (true value from an explicit
    state space, or analytic_degree_bound for simulation-only runs).
    """
    kind = params.kind
    if kind in MAXIMAL_KINDS:
        if delta_m is None:
            delta_m = analytic_degree_bound(g, params)
        return 2.0 * delta_m
    if kind in (KIND_IS, KIND_CSDS):
        return float(g.n)
    if kind in (KIND_BEC, KIND_BM):
        return float(g.m)
    if kind == KIND_PCOL:
        return float(g.n * (params.q + 1))
    if kind == KIND_COL:
        return float(g.n * (params.q - 1))
    raise AssertionError(kind)


def move_probability(params: ChainParams, tag: str, normalizer: float) -> float:
    """Probability of one tagged move under the given proposal normalizer."""
    lam = params.lam
    if params.kind in MAXIMAL_KINDS:
        return 1.0 / normalizer
    if params.kind == KIND_COL:
        return 0.5 / normalizer
    if tag in ("add", "recolor"):
        return lam / (normalizer * (lam + 1.0))
    if tag == "drop":
        return 1.0 / (normalizer * (lam + 1.0))
    raise ValueError(f"unknown move tag {tag!r}")


def transition_probability(g: Graph, params: ChainParams, s, s2, delta_m: Optional[int] = None) -> float:
    """P(s, s2) for s2 a single move away from s, or the self-loop mass."""
    norm = proposal_normalizer(g, params, delta_m)
    moves = enumerate_moves(g, params, s)
    if s2 == s:
        return 1.0 - sum(move_probability(params, tag, norm) for _, tag in moves)
    for t, tag in moves:
        if t == s2:
            return move_probability(params, tag, norm)
    raise ValueError("s2 is neither s nor adjacent to s")


# ---------------------------------------------------------------------------
# canonical start states for simulation
# ---------------------------------------------------------------------------


def initial_state(g: Graph, params: ChainParams):
    """Deterministic valid start: greedy where the empty/full state is invalid."""
    kind = params.kind
    if kind in (KIND_IS, KIND_BM):
        return 0
    if kind == KIND_PCOL:
        return (0,) * g.n
    if kind == KIND_BEC:
        s = (1 << g.m) - 1
        if not is_valid_state(g, params, s):
            raise ConfigurationError("no valid b-edge cover exists (some degree below b)")
        return s
    if kind == KIND_CSDS:
        s = 0
        for v in range(g.n):
            if g.role(v) != ROLE_FORBIDDEN:
                s |= 1 << v
        if not is_valid_state(g, params, s):
            raise ConfigurationError("no valid dominating set: a forbidden vertex has no selectable neighbor")
        return s
    if kind == KIND_MIS:
        s = 0
        for v in range(g.n):
            if not (g.neighbor_masks[v] & s):
                s |= 1 << v
        return s
    if kind == KIND_MBM:
        s = 0
        deg = [0] * g.n
        for i, (u, v) in enumerate(g.edges):
            if deg[u] < g.b(u) and deg[v] < g.b(v):
                s |= 1 << i
                deg[u] += 1
                deg[v] += 1
        if not _saturation_flags_ok(g, s):
            raise ConfigurationError("greedy start cannot satisfy the saturation flags")
        return s
    if kind == KIND_COL:
        cols = [0] * g.n
        for v in range(g.n):
            used = {cols[u] for u in g.adjacency[v]}
            avail = sorted(c for c in g.color_list(v, params.q) if c not in used)
            if not avail:
                raise ConfigurationError(
                    f"greedy coloring failed at vertex {v}; need q >= degree + 2"
                )
            cols[v] = avail[0]
        return tuple(cols)
    raise AssertionError(kind)
