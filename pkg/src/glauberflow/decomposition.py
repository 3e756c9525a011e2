"""Tree decompositions, width, balanced separators, and the separator tree.

The separator machinery drives every divide-and-conquer construction in the
package: a bag of a valid tree decomposition is shrunk to a separator X whose
removal splits the graph into sides A and B, each at most 2|V|/3, and the
sides are split recursively until single vertices remain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .graphs import Graph, connected_components, induced_subgraph


@dataclass(frozen=True)
class TreeDecomposition:
    bags: tuple[frozenset[int], ...]
    tree_edges: tuple[tuple[int, int], ...]

    @property
    def k(self) -> int:
        return len(self.bags)


@dataclass
class DecompositionReport:
    vertex_cover_ok: bool
    edge_cover_ok: bool
    connectivity_ok: bool
    witness: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.vertex_cover_ok and self.edge_cover_ok and self.connectivity_ok


def decomposition_width(td: TreeDecomposition) -> int:
    """One less than the size of the largest bag."""
    if not td.bags:
        raise ValueError("empty decomposition has no width")
    return max(len(b) for b in td.bags) - 1


def validate_decomposition(g: Graph, td: TreeDecomposition) -> DecompositionReport:
    """Check the three tree-decomposition conditions, with a witness on failure.

    1. every vertex lies in some bag;
    2. every edge has both endpoints together in some bag;
    3. the bags containing any given vertex form a connected subtree.
    """
    covered = set().union(*td.bags) if td.bags else set()
    witness = None
    vertex_ok = covered == set(range(g.n))
    if not vertex_ok:
        missing = min(set(range(g.n)) - covered)
        witness = f"vertex {missing} in no bag"

    edge_ok = True
    for u, v in g.edges:
        if not any(u in bag and v in bag for bag in td.bags):
            edge_ok = False
            if witness is None:
                witness = f"edge ({u}, {v}) in no bag"
            break

    # condition 3 via BFS on the restriction of the tree to bags containing v
    tree_adj: list[list[int]] = [[] for _ in range(td.k)]
    for i, j in td.tree_edges:
        tree_adj[i].append(j)
        tree_adj[j].append(i)
    conn_ok = True
    for v in range(g.n):
        holding = [i for i in range(td.k) if v in td.bags[i]]
        if len(holding) <= 1:
            continue
        allowed = set(holding)
        seen = {holding[0]}
        stack = [holding[0]]
        while stack:
            i = stack.pop()
            for j in tree_adj[i]:
                if j in allowed and j not in seen:
                    seen.add(j)
                    stack.append(j)
        if seen != allowed:
            conn_ok = False
            if witness is None:
                witness = f"bags holding vertex {v} are not a connected subtree"
            break

    return DecompositionReport(vertex_ok, edge_ok, conn_ok, witness)


def min_fill_order(g: Graph) -> tuple[int, ...]:
    """Elimination order chosen greedily by fill-in, ties by degree then index."""
    nbrs = {v: set(g.adjacency[v]) for v in range(g.n)}
    remaining = set(range(g.n))
    order = []
    while remaining:
        best = None
        for v in sorted(remaining):
            nv = nbrs[v]
            fill = sum(
                1
                for u in nv
                for w in nv
                if u < w and w not in nbrs[u]
            )
            key = (fill, len(nv), v)
            if best is None or key < best[0]:
                best = (key, v)
        v = best[1]
        order.append(v)
        nv = sorted(nbrs[v])
        for i, u in enumerate(nv):
            for w in nv[i + 1:]:
                nbrs[u].add(w)
                nbrs[w].add(u)
        for u in nv:
            nbrs[u].discard(v)
        del nbrs[v]
        remaining.discard(v)
    return tuple(order)


def decomposition_from_elimination(g: Graph, order: tuple[int, ...]) -> TreeDecomposition:
    """Standard bag construction along an elimination order.

    Bag of v is v plus its not-yet-eliminated neighbors in the fill graph;
    each bag attaches to the bag of the first-eliminated such neighbor.
    """
    if sorted(order) != list(range(g.n)):
        raise ValueError("order must be a permutation of the vertices")
    pos = {v: i for i, v in enumerate(order)}
    nbrs = {v: set(g.adjacency[v]) for v in range(g.n)}
    bags = []
    later_of = {}
    for v in order:
        later = sorted((u for u in nbrs[v] if pos[u] > pos[v]), key=lambda u: pos[u])
        bags.append(frozenset([v] + later))
        later_of[v] = later
        for i, u in enumerate(later):
            for w in later[i + 1:]:
                nbrs[u].add(w)
                nbrs[w].add(u)
        for u in later:
            nbrs[u].discard(v)

    bag_of = {v: i for i, v in enumerate(order)}
    tree_edges = []
    roots = []
    for i, v in enumerate(order):
        later = later_of[v]
        if later:
            tree_edges.append((i, bag_of[later[0]]))
        else:
            roots.append(i)
    # chain component roots so the bags always form a single tree
    for a, b in zip(roots, roots[1:]):
        tree_edges.append((a, b))
    return TreeDecomposition(tuple(bags), tuple(tree_edges))


def compute_decomposition(g: Graph) -> TreeDecomposition:
    """Heuristic tree decomposition; always valid, width not necessarily optimal.

    Uses the generator's construction order when the graph carries one,
    otherwise min-fill elimination.
    """
    if g.n == 0:
        return TreeDecomposition((frozenset(),), ())
    order = g.elimination_hint if g.elimination_hint is not None else min_fill_order(g)
    return decomposition_from_elimination(g, order)


def find_balanced_separator(g: Graph, td: TreeDecomposition) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
    """Pick a bag, trim it, and split the rest into balanced sides.

    Returns (X, A, B) with X a subset of some bag (so |X| <= width+1), no
    edge joining A and B, and |A|, |B| <= 2|V|/3.  Deterministic: the bag
    minimizing the largest component of G - bag wins, ties by bag index;
    components are packed largest-first onto the lighter side; trimming then
    moves separator vertices with all remaining neighbors on one side into
    that side when balance permits.
    """
    if g.n == 0:
        return (), (), ()
    best = None
    for i, bag in enumerate(td.bags):
        rest = [v for v in range(g.n) if v not in bag]
        comps = _components_within(g, rest)
        worst = max((len(c) for c in comps), default=0)
        key = (worst, i)
        if best is None or key < best[0]:
            best = (key, i, comps)
    _, bag_i, comps = best
    x = set(td.bags[bag_i])

    comps = sorted(comps, key=lambda c: (-len(c), c[0] if c else -1))
    side_a: set[int] = set()
    side_b: set[int] = set()
    for comp in comps:
        if len(side_a) <= len(side_b):
            side_a.update(comp)
        else:
            side_b.update(comp)

    limit = 2 * g.n / 3
    changed = True
    while changed:
        changed = False
        for v in sorted(x):
            nb = set(g.adjacency[v])
            touches_a = bool(nb & side_a)
            touches_b = bool(nb & side_b)
            if touches_a and touches_b:
                continue
            targets = []
            if not touches_b:
                targets.append(side_a)
            if not touches_a:
                targets.append(side_b)
            targets.sort(key=len)
            for side in targets:
                if len(side) + 1 <= limit:
                    side.add(v)
                    x.discard(v)
                    changed = True
                    break

    # normalize: the side holding the smallest vertex is A
    a, b = sorted(side_a), sorted(side_b)
    if b and (not a or b[0] < a[0]):
        a, b = b, a
    return tuple(sorted(x)), tuple(a), tuple(b)


def _components_within(g: Graph, vertices: list[int]) -> list[list[int]]:
    vset = set(vertices)
    seen = set()
    comps = []
    for s in vertices:
        if s in seen:
            continue
        comp = [s]
        seen.add(s)
        stack = [s]
        while stack:
            u = stack.pop()
            for w in g.adjacency[u]:
                if w in vset and w not in seen:
                    seen.add(w)
                    comp.append(w)
                    stack.append(w)
        comps.append(sorted(comp))
    return comps


@dataclass
class SeparatorTree:
    """Recursive balanced-separator split of a vertex set.

    Vertices keep their labels from the root graph.  ``balanced`` is False
    only for virtual roots introduced to handle disconnected inputs.
    """

    vertices: tuple[int, ...]
    x: tuple[int, ...]
    side_a: tuple[int, ...]
    side_b: tuple[int, ...]
    child_a: Optional["SeparatorTree"]
    child_b: Optional["SeparatorTree"]
    balanced: bool = True

    @property
    def is_leaf(self) -> bool:
        return self.child_a is None and self.child_b is None

    @property
    def depth(self) -> int:
        if self.is_leaf:
            return 0
        da = self.child_a.depth if self.child_a else 0
        db = self.child_b.depth if self.child_b else 0
        return 1 + max(da, db)

    def augmented_side_a(self) -> tuple[int, ...]:
        """A together with the separator, for chains whose subproblems keep X."""
        return tuple(sorted(set(self.side_a) | set(self.x)))

    def augmented_side_b(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.side_b) | set(self.x)))


def build_separator_tree(g: Graph) -> SeparatorTree:
    """Recursive balanced separators down to graphs with at most one vertex."""
    return _build_sep_tree(g, tuple(range(g.n)))


def _build_sep_tree(g: Graph, vertices: tuple[int, ...]) -> SeparatorTree:
    if len(vertices) <= 1:
        return SeparatorTree(vertices, (), (), (), None, None)
    sub, vmap = induced_subgraph(g, vertices)
    inv = {i: v for v, i in vmap.items()}
    comps = connected_components(sub)
    if len(comps) > 1:
        # virtual root with empty separator: pack components onto two sides
        comps = sorted(comps, key=lambda c: (-len(c), c[0]))
        sa: list[int] = []
        sb: list[int] = []
        for comp in comps:
            (sa if len(sa) <= len(sb) else sb).extend(inv[i] for i in comp)
        sa, sb = tuple(sorted(sa)), tuple(sorted(sb))
        bal = len(sa) <= 2 * len(vertices) / 3 and len(sb) <= 2 * len(vertices) / 3
        return SeparatorTree(
            vertices, (), sa, sb,
            _build_sep_tree(g, sa), _build_sep_tree(g, sb),
            balanced=bal,
        )
    td = compute_decomposition(sub)
    x, a, b = find_balanced_separator(sub, td)
    xg = tuple(sorted(inv[i] for i in x))
    ag = tuple(sorted(inv[i] for i in a))
    bg = tuple(sorted(inv[i] for i in b))
    child_a = _build_sep_tree(g, ag) if ag else None
    child_b = _build_sep_tree(g, bg) if bg else None
    return SeparatorTree(vertices, xg, ag, bg, child_a, child_b)


def check_separator_tree(g: Graph, node: SeparatorTree) -> None:
    """Assert the structural invariants of every node (used by tests)."""
    vs = set(node.vertices)
    if node.is_leaf:
        if len(vs) > 1:
            raise AssertionError("leaf with more than one vertex")
        return
    xs, as_, bs = set(node.x), set(node.side_a), set(node.side_b)
    if xs | as_ | bs != vs or (xs & as_) or (xs & bs) or (as_ & bs):
        raise AssertionError("X, A, B do not partition the node's vertices")
    for u, v in g.edges:
        if (u in as_ and v in bs) or (u in bs and v in as_):
            raise AssertionError(f"edge ({u}, {v}) joins A and B")
    if node.balanced and node.x:
        if len(as_) > 2 * len(vs) / 3 or len(bs) > 2 * len(vs) / 3:
            raise AssertionError("unbalanced split at a balanced node")
    if node.child_a is not None:
        if set(node.child_a.vertices) != as_:
            raise AssertionError("child A vertex set mismatch")
        check_separator_tree(g, node.child_a)
    elif as_:
        raise AssertionError("nonempty side A without a child")
    if node.child_b is not None:
        if set(node.child_b.vertices) != bs:
            raise AssertionError("child B vertex set mismatch")
        check_separator_tree(g, node.child_b)
    elif bs:
        raise AssertionError("nonempty side B without a child")


# ---------------------------------------------------------------------------
# serialization: line 1 "k", then k lines of bag members, then k-1 tree edges
# ---------------------------------------------------------------------------


def format_decomposition(td: TreeDecomposition) -> str:
    out = [str(td.k)]
    out.extend(" ".join(str(v) for v in sorted(bag)) for bag in td.bags)
    out.extend(f"{i} {j}" for i, j in td.tree_edges)
    return "\n".join(out) + "\n"


def parse_decomposition(text: str) -> TreeDecomposition:
    lines = text.split("\n")
    k = int(lines[0].strip())
    bags = tuple(frozenset(int(v) for v in lines[1 + i].split()) for i in range(k))
    tree_edges = []
    for line in lines[1 + k:]:
        if line.strip():
            a, b = line.split()
            tree_edges.append((int(a), int(b)))
    return TreeDecomposition(bags, tuple(tree_edges))


def save_decomposition(td: TreeDecomposition, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_decomposition(td))


def load_decomposition(path) -> TreeDecomposition:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_decomposition(fh.read())
