"""Degree-distribution distance and graphlet correlation distance."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import rankdata

from .graphcore import Graph, degree_histogram

# Orbits of connected graphlets on 2-4 nodes, standard numbering:
#   0 edge | 1,2 three-path (end, middle) | 3 triangle
#   4,5 four-path (end, inner) | 6,7 three-star (leaf, hub) | 8 four-cycle
#   9,10,11 paw (pendant, degree-2, degree-3) | 12,13 diamond (degree-2, degree-3) | 14 K4
NUM_ORBITS = 15
# Non-redundant subset used for GCD-11.
GCD11_ORBITS = (0, 1, 2, 4, 5, 6, 7, 8, 9, 10, 11)


def normalized_degree_distribution(graph: Graph) -> dict[int, float]:
    scaled = {k: count / k for k, count in degree_histogram(graph).items()}
    total = sum(scaled.values())
    if total == 0:
        raise ValueError("graph has no edges")
    return {k: s / total for k, s in scaled.items()}


def degree_distance(g1: Graph, g2: Graph) -> float:
    n1 = normalized_degree_distribution(g1)
    n2 = normalized_degree_distribution(g2)
    sq = sum((n1.get(k, 0.0) - n2.get(k, 0.0)) ** 2 for k in set(n1) | set(n2))
    return math.sqrt(sq) / math.sqrt(2)


def _four_node_orbits(degs: list[int], n_edges: int) -> list[int]:
    if n_edges == 3:
        if max(degs) == 3:
            return [7 if d == 3 else 6 for d in degs]
        return [4 if d == 1 else 5 for d in degs]
    if n_edges == 4:
        if max(degs) == 2:
            return [8] * 4
        return [{1: 9, 2: 10, 3: 11}[d] for d in degs]
    if n_edges == 5:
        return [12 if d == 2 else 13 for d in degs]
    return [14] * 4


def orbit_counts(graph: Graph) -> tuple[list[int], np.ndarray]:
    """Per-node orbit counts; returns (node order, array of shape (nodes, 15)).

    Connected induced subgraphs are enumerated once each by growing sets
    from their smallest node (ESU-style extension).
    """
    order = sorted(graph.nodes)
    index = {v: i for i, v in enumerate(order)}
    adj = graph.adjacency
    counts = np.zeros((len(order), NUM_ORBITS), dtype=np.int64)

    def record(sub: tuple[int, ...]):
        k = len(sub)
        degs = [sum(1 for w in sub if w in adj[v]) for v in sub]
        m = sum(degs) // 2
        if k == 2:
            orbits = [0, 0]
        elif k == 3:
            orbits = [3] * 3 if m == 3 else [1 if d == 1 else 2 for d in degs]
        else:
            orbits = _four_node_orbits(degs, m)
        for v, o in zip(sub, orbits):
            counts[index[v], o] += 1

    def extend(sub: tuple[int, ...], ext: set[int], root: int):
        if len(sub) > 1:
            record(sub)
        if len(sub) == 4:
            return
        ext = set(ext)
        neighborhood = set().union(*(adj[v] for v in sub))
        while ext:
            w = ext.pop()
            new_ext = ext | {x for x in adj[w] if x > root and x not in sub and x not in neighborhood}
            extend(sub + (w,), new_ext, root)

    for v in order:
        extend((v,), {w for w in adj[v] if w > v}, v)
    return order, counts


def graphlet_correlation_matrix(graph: Graph, orbits=GCD11_ORBITS) -> np.ndarray:
    """Spearman correlations between orbit columns, average ranks for ties.

    A constant column has no defined correlation; it is given 0 against
    every other column.
    """
    _, counts = orbit_counts(graph)
    cols = counts[:, list(orbits)].astype(float)
    ranks = np.column_stack([rankdata(cols[:, j]) for j in range(cols.shape[1])]) if len(cols) else cols
    centered = ranks - ranks.mean(axis=0)
    norms = np.sqrt((centered ** 2).sum(axis=0))
    k = len(orbits)
    corr = np.zeros((k, k))
    for a in range(k):
        for b in range(k):
            if norms[a] > 0 and norms[b] > 0:
                corr[a, b] = float(centered[:, a] @ centered[:, b]) / (norms[a] * norms[b])
    return corr


def gcd(g1: Graph, g2: Graph) -> float:
    if g1.number_of_nodes() < 2 or g2.number_of_nodes() < 2:
        raise ValueError("GCD needs graphs with at least two nodes")
    c1 = graphlet_correlation_matrix(g1)
    c2 = graphlet_correlation_matrix(g2)
    iu = np.triu_indices(c1.shape[0], k=1)
    return float(np.linalg.norm(c1[iu] - c2[iu]))
