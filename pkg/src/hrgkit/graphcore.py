"""Simple undirected graphs, edge-list I/O, synthetic generators and samplers."""

from __future__ import annotations

import random
from collections import Counter, deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, TextIO

import networkx as nx
import numpy as np

Edge = tuple[int, int]


class EdgeListError(ValueError):
    """Raised when an edge-list line cannot be parsed."""


class SamplingError(RuntimeError):
    pass


def _edge(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Graph:
    """Immutable simple undirected graph.

    Edges are stored as ``(u, v)`` with ``u < v``.  Use :meth:`from_edges`
    to build one from arbitrary pairs.
    """

    nodes: frozenset[int]
    edges: frozenset[Edge]

    def __post_init__(self):
        for u, v in self.edges:
            if u >= v:
                raise ValueError(f"edge ({u}, {v}) is not normalized (self-loop or u > v)")
            if u not in self.nodes or v not in self.nodes:
                raise ValueError(f"edge ({u}, {v}) references a node outside the node set")

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[int, int]], nodes: Iterable[int] = ()) -> "Graph":
        """Build a graph, dropping self-loops and collapsing duplicates."""
        es = frozenset(_edge(int(u), int(v)) for u, v in edges if u != v)
        ns = set(int(n) for n in nodes)
        for u, v in es:
            ns.add(u)
            ns.add(v)
        return cls(frozenset(ns), es)

    @cached_property
    def adjacency(self) -> dict[int, frozenset[int]]:
        adj: dict[int, set[int]] = {v: set() for v in self.nodes}
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return {v: frozenset(nb) for v, nb in adj.items()}

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def number_of_nodes(self) -> int:
        return len(self.nodes)

    def number_of_edges(self) -> int:
        return len(self.edges)

    def induced_subgraph(self, nodes: Iterable[int]) -> "Graph":
        keep = frozenset(nodes)
        es = frozenset(e for e in self.edges if e[0] in keep and e[1] in keep)
        return Graph(keep, es)

    def relabel(self, mapping: dict[int, int]) -> "Graph":
        return Graph.from_edges(((mapping[u], mapping[v]) for u, v in self.edges),
                                (mapping[v] for v in self.nodes))

    def connected_components(self) -> list[frozenset[int]]:
        seen: set[int] = set()
        comps = []
        for start in sorted(self.nodes):
            if start in seen:
                continue
            comp = {start}
            queue = deque([start])
            while queue:
                u = queue.popleft()
                for w in self.adjacency[u]:
                    if w not in comp:
                        comp.add(w)
                        queue.append(w)
            seen |= comp
            comps.append(frozenset(comp))
        return comps

    def is_connected(self) -> bool:
        return len(self.nodes) > 0 and len(self.connected_components()) == 1

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(sorted(self.nodes))
        g.add_edges_from(sorted(self.edges))
        return g

    @classmethod
    def from_networkx(cls, g: nx.Graph) -> "Graph":
        return cls.from_edges(g.edges(), g.nodes())


def load_edge_list(source: TextIO) -> Graph:
    """Read a whitespace-separated edge list.

    Lines starting with ``#`` are skipped, self-loops are dropped and
    ``u v`` / ``v u`` collapse to one undirected edge.
    """
    edges = []
    for lineno, line in enumerate(source, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = stripped.split()
        if len(tokens) < 2:
            raise EdgeListError(f"line {lineno}: expected two node ids, got {stripped!r}")
        try:
            u, v = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise EdgeListError(f"line {lineno}: node ids must be integers, got {stripped!r}") from None
        if u < 0 or v < 0:
            raise EdgeListError(f"line {lineno}: node ids must be non-negative")
        edges.append((u, v))
    return Graph.from_edges(edges)


def write_edge_list(graph: Graph, sink: TextIO) -> None:
    for u, v in sorted(graph.edges):
        sink.write(f"{u} {v}\n")


def generate_barabasi_albert(num_nodes: int, attach_edges: int, seed: int) -> Graph:
    if attach_edges < 1 or num_nodes < 1 or attach_edges >= num_nodes:
        raise ValueError("need 1 <= attach_edges < num_nodes")
    return Graph.from_networkx(nx.barabasi_albert_graph(num_nodes, attach_edges, seed=seed))


def generate_watts_strogatz(num_nodes: int, ring_degree: int, rewire_prob: float, seed: int) -> Graph:
    if ring_degree < 1 or ring_degree % 2 or ring_degree >= num_nodes:
        raise ValueError("ring_degree must be even, positive and below num_nodes")
    if not 0.0 <= rewire_prob <= 1.0:
        raise ValueError("rewire_prob must lie in [0, 1]")
    return Graph.from_networkx(nx.watts_strogatz_graph(num_nodes, ring_degree, rewire_prob, seed=seed))


def chung_lu_probabilities(target: Graph) -> tuple[list[int], np.ndarray]:
    """Pairwise edge probabilities ``min(1, w_u w_v / sum(w))``."""
    order = sorted(target.nodes)
    w = np.array([target.degree(v) for v in order], dtype=float)
    total = w.sum()
    if total == 0:
        return order, np.zeros((len(order), len(order)))
    p = np.minimum(1.0, np.outer(w, w) / total)
    np.fill_diagonal(p, 0.0)
    return order, p


def generate_chung_lu(target: Graph, seed: int) -> Graph:
    if not target.nodes:
        raise ValueError("target graph is empty")
    order, p = chung_lu_probabilities(target)
    rng = np.random.default_rng(seed)
    draws = rng.random(p.shape)
    iu, ju = np.triu_indices(len(order), k=1)
    hit = draws[iu, ju] < p[iu, ju]
    edges = [(order[i], order[j]) for i, j in zip(iu[hit], ju[hit])]
    return Graph.from_edges(edges, order)


def sample_subgraph(graph: Graph, size: int, seed: int) -> Graph:
    """Random-walk sample of exactly ``size`` nodes, returned as an induced subgraph.

    The walk starts at a uniformly chosen node of a large-enough component.
    When it stops discovering nodes for a while it jumps back to a random
    visited node.
    """
    if size < 1:
        raise ValueError("size must be positive")
    eligible = sorted(v for comp in graph.connected_components() if len(comp) >= size for v in comp)
    if not eligible:
        raise SamplingError(f"no connected component with at least {size} nodes")
    rng = random.Random(seed)
    adj = {v: sorted(nb) for v, nb in graph.adjacency.items()}
    current = rng.choice(eligible)
    visited = [current]
    seen = {current}
    stall_limit = 10 * size
    stalled = 0
    while len(visited) < size:
        nbrs = adj[current]
        if not nbrs or stalled > stall_limit:
            current = rng.choice(visited)
            stalled = 0
            continue
        current = rng.choice(nbrs)
        if current in seen:
            stalled += 1
        else:
            seen.add(current)
            visited.append(current)
            stalled = 0
    return graph.induced_subgraph(visited)


def degree_histogram(graph: Graph) -> dict[int, int]:
    counts = Counter(graph.degree(v) for v in graph.nodes)
    counts.pop(0, None)
    return dict(sorted(counts.items()))
