"""Glauber dynamics on bounded-treewidth graphs.

Exact state spaces for eight single-site dynamics, separator-based
decompositions of those state spaces, recursive multicommodity flows with
measured congestion, and the expansion/conductance/mixing bounds they imply,
all cross-checked against brute-force oracles at desk scale.
"""

from .chains import ChainParams, KINDS
from .graphs import Graph, generate, load_graph, make_graph, save_graph
from .statespace import StateSpace, build_state_space, enumerate_states

__all__ = [
    "ChainParams",
    "KINDS",
    "Graph",
    "generate",
    "load_graph",
    "make_graph",
    "save_graph",
    "StateSpace",
    "build_state_space",
    "enumerate_states",
]
