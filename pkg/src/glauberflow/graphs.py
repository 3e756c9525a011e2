"""Underlying graphs: representation, annotations, generators, and file I/O.

Vertices are dense 0-indexed integers.  Edges are stored once, canonicalized
as (u, v) with u < v.  Optional per-vertex annotations carry the data the
different dynamics need: degree bounds ``b_values``, color lists, domination
roles, and saturation flags.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

ROLE_NORMAL = "normal"
ROLE_STEINER = "steiner"
ROLE_FORBIDDEN = "forbidden"
ROLES = (ROLE_NORMAL, ROLE_STEINER, ROLE_FORBIDDEN)

GENERATOR_FAMILIES = ("path", "cycle", "complete", "random_tree", "partial_k_tree", "grid")


class GraphParseError(ValueError):
    """Malformed graph file; message names the 1-based offending line."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def rng_stream(seed: int, stream: int = 0) -> np.random.Generator:
    """Reproducible PRNG substream: Philox4x64 keyed by (seed, stream).

    Philox output is stable across platforms and numpy releases, and distinct
    keys give independent streams, so (seed, replica_index) addresses a
    substream without any coordination between workers.
    """
    mask = (1 << 64) - 1
    return np.random.Generator(np.random.Philox(key=[seed & mask, stream & mask]))


@dataclass(frozen=True)
class Graph:
    """Immutable undirected graph with optional per-vertex annotations.

    ``b_values``: nonnegative degree bounds (edge-cover floors / matching caps).
    ``color_lists``: allowed colors per vertex, subsets of {1..q}; None means
    every vertex may use the full palette.
    ``roles``: domination roles (normal / steiner / forbidden).
    ``must_saturate``: vertices that every valid maximal b-matching must
    saturate; arises when boundary edges of a separator are pinned.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    b_values: Optional[tuple[int, ...]] = None
    color_lists: Optional[tuple[frozenset[int], ...]] = None
    roles: Optional[tuple[str, ...]] = None
    must_saturate: Optional[tuple[bool, ...]] = None
    elimination_hint: Optional[tuple[int, ...]] = None

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        return tuple(tuple(sorted(a)) for a in nbrs)

    @cached_property
    def neighbor_masks(self) -> tuple[int, ...]:
        masks = [0] * self.n
        for u, v in self.edges:
            masks[u] |= 1 << v
            masks[v] |= 1 << u
        return tuple(masks)

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {e: i for i, e in enumerate(self.edges)}

    @cached_property
    def incident_edge_ids(self) -> tuple[tuple[int, ...], ...]:
        inc: list[list[int]] = [[] for _ in range(self.n)]
        for i, (u, v) in enumerate(self.edges):
            inc[u].append(i)
            inc[v].append(i)
        return tuple(tuple(a) for a in inc)

    @property
    def m(self) -> int:
        return len(self.edges)

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @cached_property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    def role(self, v: int) -> str:
        return self.roles[v] if self.roles is not None else ROLE_NORMAL

    def b(self, v: int) -> int:
        # b defaults to the constant 1 when a b-chain runs without explicit values
        return self.b_values[v] if self.b_values is not None else 1

    def color_list(self, v: int, q: int) -> frozenset[int]:
        if self.color_lists is not None:
            return self.color_lists[v]
        return frozenset(range(1, q + 1))

    def saturate_required(self, v: int) -> bool:
        return bool(self.must_saturate[v]) if self.must_saturate is not None else False

    def signature(self) -> tuple:
        """Hashable identity used to memoize work keyed on the graph."""
        return (
            self.n,
            self.edges,
            self.b_values,
            self.color_lists,
            self.roles,
            self.must_saturate,
        )


def make_graph(n: int, edges: Iterable[Sequence[int]], **annotations) -> Graph:
    """Canonicalize and validate an edge list into a Graph."""
    canon = []
    seen = set()
    for e in edges:
        u, v = int(e[0]), int(e[1])
        if u == v:
            raise ValueError(f"self-loop at vertex {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
        if u > v:
            u, v = v, u
        if (u, v) in seen:
            raise ValueError(f"duplicate edge ({u}, {v})")
        seen.add((u, v))
        canon.append((u, v))
    canon.sort()
    g = Graph(n=n, edges=tuple(canon), **annotations)
    validate_graph(g)
    return g


def validate_graph(g: Graph) -> None:
    for u, v in g.edges:
        if not (0 <= u < v < g.n):
            raise ValueError(f"edge ({u}, {v}) not canonical for n={g.n}")
    if len(set(g.edges)) != len(g.edges):
        raise ValueError("duplicate edges")
    for name in ("b_values", "color_lists", "roles", "must_saturate"):
        val = getattr(g, name)
        if val is not None and len(val) != g.n:
            raise ValueError(f"{name} has length {len(val)}, expected {g.n}")
    if g.b_values is not None and any(b < 0 for b in g.b_values):
        raise ValueError("negative b value")
    if g.roles is not None and any(r not in ROLES for r in g.roles):
        raise ValueError("unknown role tag")
    if g.color_lists is not None:
        for v, lst in enumerate(g.color_lists):
            if any(c < 1 for c in lst):
                raise ValueError(f"vertex {v} has a color below 1")


def with_annotations(g: Graph, **kwargs) -> Graph:
    return replace(g, **kwargs)


# ---------------------------------------------------------------------------
# file format
#
#   line 1:            "n m"
#   next m lines:      "u v"
#   optional sections, each introduced by a marker line:
#     "#b"      then lines "v value"
#     "#lists"  then lines "v c1 c2 ..."
#     "#roles"  then lines "v normal|steiner|forbidden"
# ---------------------------------------------------------------------------


def load_graph(path) -> Graph:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_graph(text)


def parse_graph(text: str) -> Graph:
    lines = text.split("\n")
    idx = 0

    def next_line():
        nonlocal idx
        while idx < len(lines):
            raw = lines[idx]
            idx += 1
            if raw.strip():
                return idx, raw.strip()
        return None, None

    ln, header = next_line()
    if header is None:
        raise GraphParseError(1, "empty file, expected header 'n m'")
    parts = header.split()
    if len(parts) != 2:
        raise GraphParseError(ln, f"malformed header {header!r}, expected 'n m'")
    try:
        n, m = int(parts[0]), int(parts[1])
    except ValueError:
        raise GraphParseError(ln, f"malformed header {header!r}, expected two integers")
    if n < 0 or m < 0:
        raise GraphParseError(ln, "negative count in header")

    edges: list[tuple[int, int]] = []
    seen = set()
    for _ in range(m):
        ln, line = next_line()
        if line is None:
            raise GraphParseError(len(lines), f"expected {m} edge lines, file ended early")
        parts = line.split()
        if len(parts) != 2:
            raise GraphParseError(ln, f"malformed edge line {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphParseError(ln, f"malformed edge line {line!r}")
        if u == v:
            raise GraphParseError(ln, f"self-loop at vertex {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise GraphParseError(ln, f"vertex out of range in edge ({u}, {v})")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphParseError(ln, f"duplicate edge ({u}, {v})")
        seen.add(key)
        edges.append(key)

    b_values = None
    color_lists = None
    roles = None
    section = None
    while True:
        ln, line = next_line()
        if line is None:
            break
        if line.startswith("#"):
            marker = line
            if marker == "#b":
                section = "b"
                b_values = [1] * n
            elif marker == "#lists":
                section = "lists"
                color_lists = [None] * n
            elif marker == "#roles":
                section = "roles"
                roles = [ROLE_NORMAL] * n
            else:
                raise GraphParseError(ln, f"unknown section marker {marker!r}")
            continue
        if section is None:
            raise GraphParseError(ln, f"unexpected line {line!r} after edge list")
        parts = line.split()
        try:
            v = int(parts[0])
        except ValueError:
            raise GraphParseError(ln, f"malformed section line {line!r}")
        if not (0 <= v < n):
            raise GraphParseError(ln, f"vertex {v} out of range")
        if section == "b":
            if len(parts) != 2:
                raise GraphParseError(ln, f"malformed b line {line!r}")
            try:
                val = int(parts[1])
            except ValueError:
                raise GraphParseError(ln, f"malformed b line {line!r}")
            if val < 0:
                raise GraphParseError(ln, f"negative b value for vertex {v}")
            b_values[v] = val
        elif section == "lists":
            try:
                colors = [int(c) for c in parts[1:]]
            except ValueError:
                raise GraphParseError(ln, f"malformed list line {line!r}")
            for c in colors:
                if c < 1:
                    raise GraphParseError(ln, f"color {c} outside the palette (colors start at 1)")
            color_lists[v] = frozenset(colors)
        elif section == "roles":
            if len(parts) != 2 or parts[1] not in ROLES:
                raise GraphParseError(ln, f"malformed role line {line!r}")
            roles[v] = parts[1]

    if color_lists is not None:
        full = None  # vertices left unlisted keep the full palette; resolved per q
        color_lists = tuple(lst if lst is not None else full for lst in color_lists)
        if any(lst is None for lst in color_lists):
            # normalize: unlisted vertices get the union of all listed colors
            union = frozenset().union(*(l for l in color_lists if l is not None))
            color_lists = tuple(lst if lst is not None else union for lst in color_lists)

    return make_graph(
        n,
        edges,
        b_values=tuple(b_values) if b_values is not None else None,
        color_lists=color_lists,
        roles=tuple(roles) if roles is not None else None,
    )


def format_graph(g: Graph) -> str:
    out = [f"{g.n} {g.m}"]
    out.extend(f"{u} {v}" for u, v in g.edges)
    if g.b_values is not None:
        out.append("#b")
        out.extend(f"{v} {g.b_values[v]}" for v in range(g.n))
    if g.color_lists is not None:
        out.append("#lists")
        out.extend(f"{v} " + " ".join(str(c) for c in sorted(g.color_lists[v])) for v in range(g.n))
    if g.roles is not None:
        out.append("#roles")
        out.extend(f"{v} {g.roles[v]}" for v in range(g.n))
    return "\n".join(out) + "\n"


def save_graph(g: Graph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_graph(g))


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def generate(family: str, n: int, seed: int = 0, k: int = 1) -> Graph:
    """Deterministic graph generator; pure function of (family, n, seed, k).

    For family="grid", n is the side length of an n-by-n grid.  Generated
    graphs carry an elimination order witnessing their treewidth bound
    (paths/trees: 1, cycles: 2, partial_k_tree: k, grid: n).
    """
    if family not in GENERATOR_FAMILIES:
        raise ValueError(f"unsupported family {family!r}")
    if n < 1:
        raise ValueError("n must be at least 1")

    if family == "path":
        edges = [(i, i + 1) for i in range(n - 1)]
        return make_graph(n, edges, elimination_hint=tuple(range(n)))

    if family == "cycle":
        if n < 3:
            raise ValueError("cycle needs n >= 3")
        edges = [(i, i + 1) for i in range(n - 1)] + [(0, n - 1)]
        return make_graph(n, edges, elimination_hint=tuple(range(n)))

    if family == "complete":
        edges = [(u, v) for u in range(n) for v in range(u + 1, n)]
        return make_graph(n, edges, elimination_hint=tuple(range(n)))

    if family == "random_tree":
        rng = rng_stream(seed, 0)
        edges = [(int(rng.integers(0, v)), v) for v in range(1, n)]
        # children have higher indices, so reverse order eliminates leaves first
        return make_graph(n, edges, elimination_hint=tuple(range(n - 1, -1, -1)))

    if family == "partial_k_tree":
        if k < 1:
            raise ValueError("partial_k_tree needs k >= 1")
        return _partial_k_tree(n, seed, k)

    if family == "grid":
        side = n
        def vid(r, c):
            return r * side + c
        edges = []
        for r in range(side):
            for c in range(side):
                if c + 1 < side:
                    edges.append((vid(r, c), vid(r, c + 1)))
                if r + 1 < side:
                    edges.append((vid(r, c), vid(r + 1, c)))
        order = [vid(r, c) for c in range(side) for r in range(side)]
        return make_graph(side * side, edges, elimination_hint=tuple(order))

    raise AssertionError(family)


def _partial_k_tree(n: int, seed: int, k: int) -> Graph:
    """k-tree built by repeated clique attachment, then thinned.

    Construction order gives an elimination order with bags of size <= k+1,
    so treewidth <= k by construction.  Thinning only removes non-bridge
    edges, keeping the graph connected.
    """
    import itertools

    rng = rng_stream(seed, 0)
    base = min(n, k + 1)
    edges = {(u, v) for u in range(base) for v in range(u + 1, base)}
    if n > k + 1:
        cliques = list(itertools.combinations(range(base), k))
        for v in range(base, n):
            pick = cliques[int(rng.integers(0, len(cliques)))]
            for u in pick:
                edges.add((min(u, v), max(u, v)))
            for drop in range(k):
                newc = tuple(sorted(set(pick) - {pick[drop]} | {v}))
                cliques.append(newc)

    edge_list = sorted(edges)
    keep = set(edge_list)
    order = list(range(len(edge_list)))
    rng.shuffle(order)
    for ei in order:
        e = edge_list[ei]
        if rng.random() < 0.3 and not _is_bridge(n, keep, e):
            keep.discard(e)
    order_hint = tuple(range(n - 1, -1, -1))
    return make_graph(n, sorted(keep), elimination_hint=order_hint)


def _is_bridge(n: int, edges: set[tuple[int, int]], e: tuple[int, int]) -> bool:
    rest = edges - {e}
    nbrs = [[] for _ in range(n)]
    for u, v in rest:
        nbrs[u].append(v)
        nbrs[v].append(u)
    seen = {e[0]}
    stack = [e[0]]
    while stack:
        u = stack.pop()
        for w in nbrs[u]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return e[1] not in seen


def induced_subgraph(g: Graph, vertices: Sequence[int]) -> tuple[Graph, dict[int, int]]:
    """Induced subgraph on the given vertex set, relabeled densely.

    Returns the subgraph and the old->new vertex map.  Annotations are
    sliced through.
    """
    verts = sorted(set(vertices))
    vmap = {v: i for i, v in enumerate(verts)}
    edges = [(vmap[u], vmap[v]) for u, v in g.edges if u in vmap and v in vmap]

    def slice_opt(t):
        return tuple(t[v] for v in verts) if t is not None else None

    sub = make_graph(
        len(verts),
        edges,
        b_values=slice_opt(g.b_values),
        color_lists=slice_opt(g.color_lists),
        roles=slice_opt(g.roles),
        must_saturate=slice_opt(g.must_saturate),
    )
    return sub, vmap


def connected_components(g: Graph) -> list[list[int]]:
    seen = [False] * g.n
    comps = []
    for s in range(g.n):
        if seen[s]:
            continue
        comp = [s]
        seen[s] = True
        stack = [s]
        while stack:
            u = stack.pop()
            for w in g.adjacency[u]:
                if not seen[w]:
                    seen[w] = True
                    comp.append(w)
                    stack.append(w)
        comps.append(sorted(comp))
    return comps


def is_connected(g: Graph) -> bool:
    return g.n <= 1 or len(connected_components(g)) == 1
