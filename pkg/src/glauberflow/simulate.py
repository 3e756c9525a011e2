"""Step-by-step chain simulation at scale, without explicit state spaces.

Each sampler implements the proposal-then-accept step of its dynamics
literally: pick a vertex (or edge, or vertex-color pair) uniformly, accept
with the bias ratio.  The per-step cost is O(degree) for the subset chains.
The maximal-set walks need their state-graph degree, so their sampler
memoizes move lists per visited state; at desk scale only a few dozen states
are ever visited.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import chains
from .chains import ChainParams
from .graphs import Graph, rng_stream
from .statespace import StateSpace


class ChainSimulator:
    """Seeded single-chain sampler; one PRNG substream per (seed, stream)."""

    def __init__(self, g: Graph, params: ChainParams, seed: int, stream: int = 0,
                 start=None, delta_m: Optional[int] = None):
        chains.validate_params(g, params)
        self.g = g
        self.params = params
        self.rng = rng_stream(seed, stream)
        self.state = chains.initial_state(g, params) if start is None else start
        if start is not None and not chains.is_valid_state(g, params, start):
            raise ValueError("start state is not valid")
        self.delta_m = delta_m
        if params.kind in chains.MAXIMAL_KINDS and delta_m is None:
            self.delta_m = chains.analytic_degree_bound(g, params)
        self._move_cache: dict = {}
        self._accept_add = params.lam / (params.lam + 1.0)
        # incremental counters keep drop-validity checks O(degree)
        if params.kind in (chains.KIND_BM, chains.KIND_BEC):
            self._deg = [0] * g.n
            m = self.state
            while m:
                i = (m & -m).bit_length() - 1
                u, v = g.edges[i]
                self._deg[u] += 1
                self._deg[v] += 1
                m &= m - 1
        elif params.kind == chains.KIND_CSDS:
            self._cover = [0] * g.n
            for v in range(g.n):
                if (self.state >> v) & 1:
                    self._cover[v] += 1
                    for u in g.adjacency[v]:
                        self._cover[u] += 1
            self._needs = [g.role(v) in ("normal", "forbidden") for v in range(g.n)]

    def step(self) -> None:
        kind = self.params.kind
        if kind == chains.KIND_IS:
            self._step_independent()
        elif kind == chains.KIND_CSDS:
            self._step_csds()
        elif kind in (chains.KIND_BM, chains.KIND_BEC):
            self._step_edge(kind)
        elif kind == chains.KIND_PCOL:
            self._step_partial_coloring()
        elif kind == chains.KIND_COL:
            self._step_coloring()
        else:
            self._step_maximal()

    def run(self, steps: int, counts: Optional[dict] = None, validate_every: int = 0) -> None:
        for t in range(steps):
            self.step()
            if counts is not None:
                counts[self.state] = counts.get(self.state, 0) + 1
            if validate_every and (t + 1) % validate_every == 0:
                if not chains.is_valid_state(self.g, self.params, self.state):
                    raise AssertionError(f"invalid state reached after {t + 1} steps")

    # -- per-kind steps -----------------------------------------------------

    def _step_independent(self) -> None:
        g, s = self.g, self.state
        v = int(self.rng.integers(g.n))
        add = float(self.rng.random()) < self._accept_add
        bit = 1 << v
        if s & bit:
            if not add:
                self.state = s & ~bit
        elif add and not (g.neighbor_masks[v] & s):
            self.state = s | bit

    def _step_csds(self) -> None:
        g, s = self.g, self.state
        v = int(self.rng.integers(g.n))
        add = float(self.rng.random()) < self._accept_add
        bit = 1 << v
        if s & bit:
            if not add:
                if self._needs[v] and self._cover[v] < 2:
                    return
                for u in g.adjacency[v]:
                    if self._needs[u] and self._cover[u] < 2:
                        return
                self.state = s & ~bit
                self._cover[v] -= 1
                for u in g.adjacency[v]:
                    self._cover[u] -= 1
        elif add and g.role(v) != "forbidden":
            self.state = s | bit
            self._cover[v] += 1
            for u in g.adjacency[v]:
                self._cover[u] += 1

    def _step_edge(self, kind: str) -> None:
        g, s = self.g, self.state
        if g.m == 0:
            return
        i = int(self.rng.integers(g.m))
        add = float(self.rng.random()) < self._accept_add
        bit = 1 << i
        u, v = g.edges[i]
        if s & bit:
            if not add:
                if kind == chains.KIND_BEC and not (self._deg[u] > g.b(u) and self._deg[v] > g.b(v)):
                    return
                self.state = s & ~bit
                self._deg[u] -= 1
                self._deg[v] -= 1
        else:
            if add:
                if kind == chains.KIND_BM and not (self._deg[u] < g.b(u) and self._deg[v] < g.b(v)):
                    return
                self.state = s | bit
                self._deg[u] += 1
                self._deg[v] += 1

    def _step_partial_coloring(self) -> None:
        g, s = self.g, self.state
        q = self.params.q
        v = int(self.rng.integers(g.n))
        c = int(self.rng.integers(1, q + 2))
        r = float(self.rng.random())
        if c == q + 1:
            if s[v] != 0 and r < 1.0 - self._accept_add:
                t = list(s)
                t[v] = 0
                self.state = tuple(t)
            return
        if s[v] == c or c not in g.color_list(v, q):
            return
        if any(s[u] == c for u in g.adjacency[v]):
            return
        if r < self._accept_add:
            t = list(s)
            t[v] = c
            self.state = tuple(t)

    def _step_coloring(self) -> None:
        g, s = self.g, self.state
        q = self.params.q
        v = int(self.rng.integers(g.n))
        k = int(self.rng.integers(q - 1)) + 1
        c = k if k < s[v] else k + 1
        if c not in g.color_list(v, q):
            return
        if any(s[u] == c for u in g.adjacency[v]):
            return
        if float(self.rng.random()) < 0.5:
            t = list(s)
            t[v] = c
            self.state = tuple(t)

    def _step_maximal(self) -> None:
        moves = self._move_cache.get(self.state)
        if moves is None:
            moves = [t for t, _ in chains.enumerate_moves(self.g, self.params, self.state)]
            self._move_cache[self.state] = moves
        if not moves:
            return
        r = float(self.rng.random())
        if r < len(moves) / (2.0 * self.delta_m):
            self.state = moves[int(self.rng.integers(len(moves)))]


def simulate_chain(g: Graph, params: ChainParams, steps: int, seed: int,
                   start=None, delta_m: Optional[int] = None,
                   collect_counts: bool = False, validate_every: int = 0):
    """Run one chain for the given number of steps.

    Returns (final_state, counts) where counts maps states to visit counts
    over steps 1..steps (empty unless collect_counts is set).
    """
    sim = ChainSimulator(g, params, seed, 0, start, delta_m)
    counts: Optional[dict] = {} if collect_counts else None
    sim.run(steps, counts, validate_every)
    return sim.state, (counts or {})


def occupation_tv(space: StateSpace, counts: dict) -> float:
    """Total variation between a visit histogram and the exact stationary law."""
    total = sum(counts.values())
    pi = space.stationary()
    acc = 0.0
    seen = 0.0
    for s, c in counts.items():
        i = space.index[s]
        acc += abs(c / total - pi[i])
        seen += pi[i]
    acc += 1.0 - seen
    return 0.5 * acc


def _vectorized_hardcore(g: Graph, params: ChainParams, replicas: int, seed: int,
                         checkpoints: Sequence[int], space: StateSpace, start) -> list[tuple[int, float]]:
    """All-replica lockstep simulation of the hardcore walk using bitmask arrays."""
    rng = rng_stream(seed, 0)
    masks = np.array(g.neighbor_masks, dtype=np.int64)
    states = np.full(replicas, int(start), dtype=np.int64)
    accept = params.lam / (params.lam + 1.0)
    pi = space.stationary()
    index = space.index
    out = []
    t = 0
    for cp in checkpoints:
        while t < cp:
            v = rng.integers(0, g.n, size=replicas)
            add = rng.random(replicas) < accept
            bits = np.int64(1) << v.astype(np.int64)
            inside = (states & bits) != 0
            blocked = (states & masks[v]) != 0
            states = np.where(inside & ~add, states & ~bits, states)
            states = np.where(~inside & add & ~blocked, states | bits, states)
            t += 1
        hist = np.zeros(space.n_states)
        vals, cnts = np.unique(states, return_counts=True)
        for val, c in zip(vals.tolist(), cnts.tolist()):
            hist[index[val]] += c
        out.append((cp, 0.5 * float(np.abs(hist / replicas - pi).sum())))
    return out


def empirical_tv(g: Graph, params: ChainParams, replicas: int, checkpoints: Sequence[int],
                 seed: int, space: StateSpace, start=None) -> list[tuple[int, float]]:
    """Cross-replica plug-in TV estimate against the exact stationary law.

    Replica r runs on the (seed, r) PRNG substream, so results are
    independent of any execution order.  The hardcore chain takes a
    vectorized lockstep path; other chains step sequentially.
    """
    checkpoints = sorted(set(int(c) for c in checkpoints))
    if start is None:
        start = chains.initial_state(g, params)
    if params.kind == chains.KIND_IS:
        return _vectorized_hardcore(g, params, replicas, seed, checkpoints, space, start)
    pi = space.stationary()
    hists = {cp: np.zeros(space.n_states) for cp in checkpoints}
    delta_m = space.delta_m if params.kind in chains.MAXIMAL_KINDS else None
    for r in range(replicas):
        sim = ChainSimulator(g, params, seed, r + 1, start, delta_m)
        t = 0
        for cp in checkpoints:
            sim.run(cp - t)
            t = cp
            hists[cp][space.index[sim.state]] += 1
    return [
        (cp, 0.5 * float(np.abs(hists[cp] / replicas - pi).sum()))
        for cp in checkpoints
    ]


def geometric_checkpoints(t_max: int) -> list[int]:
    """0, 1, 2, 4, ... up to t_max (mixing curves span orders of magnitude)."""
    out = [0]
    t = 1
    while t < t_max:
        out.append(t)
        t *= 2
    out.append(t_max)
    return sorted(set(out))
