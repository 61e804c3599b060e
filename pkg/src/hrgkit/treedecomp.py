"""Tree decompositions from greedy vertex elimination.

The elimination heuristic is the reduced QuickBB rule set: eliminate a
simplicial vertex when one exists, otherwise an almost-simplicial vertex
whose degree does not exceed the current width bound, otherwise the
min-fill vertex.  Ties go to the lowest node id.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

from .graphcore import Edge, Graph


@dataclass(frozen=True)
class TreeDecomposition:
    bags: tuple[frozenset[int], ...]
    parent: tuple[Optional[int], ...]
    root: int

    def __post_init__(self):
        if len(self.bags) != len(self.parent):
            raise ValueError("bags and parent must have equal length")

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        kids: list[list[int]] = [[] for _ in self.bags]
        for i, p in enumerate(self.parent):
            if p is not None:
                kids[p].append(i)
        return tuple(tuple(k) for k in kids)

    @cached_property
    def depth(self) -> tuple[int, ...]:
        depth = [0] * len(self.bags)
        for i in self.preorder():
            p = self.parent[i]
            if p is not None:
                depth[i] = depth[p] + 1
        return tuple(depth)

    def preorder(self) -> list[int]:
        out = []
        stack = [self.root]
        while stack:
            i = stack.pop()
            out.append(i)
            stack.extend(reversed(self.children[i]))
        return out

    def postorder(self) -> list[int]:
        return self.preorder()[::-1]

    def sepset(self, i: int) -> frozenset[int]:
        p = self.parent[i]
        if p is None:
            return frozenset()
        return self.bags[i] & self.bags[p]

    def dump(self) -> str:
        lines = []
        for i, bag in enumerate(self.bags):
            p = self.parent[i]
            nodes = ",".join(str(v) for v in sorted(bag))
            lines.append(f"{i}: {{{nodes}}} parent={'none' if p is None else p}")
        return "\n".join(lines) + ("\n" if lines else "")


def width(td: TreeDecomposition) -> int:
    return max((len(b) for b in td.bags), default=1) - 1


# --- validation -------------------------------------------------------------


@dataclass
class ValidityReport:
    node_cover: bool = True
    edge_cover: bool = True
    running_intersection: bool = True
    is_tree: bool = True
    uncovered_node: Optional[int] = None
    uncovered_edge: Optional[Edge] = None
    disconnected_node: Optional[int] = None
    tree_problem: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.node_cover and self.edge_cover and self.running_intersection and self.is_tree


def validate(td: TreeDecomposition, graph: Graph) -> ValidityReport:
    report = ValidityReport()
    n = len(td.bags)

    # tree-ness: exactly one root, every bag reaches it without cycles
    roots = [i for i, p in enumerate(td.parent) if p is None]
    if n == 0:
        report.is_tree = False
        report.tree_problem = "no bags"
    elif roots != [td.root]:
        report.is_tree = False
        report.tree_problem = f"roots {roots} do not match root index {td.root}"
    else:
        for i in range(n):
            steps, j = 0, i
            while j is not None and steps <= n:
                j = td.parent[j]
                steps += 1
            if j is not None:
                report.is_tree = False
                report.tree_problem = f"bag {i} does not reach the root"
                break

    covered = set().union(*td.bags) if td.bags else set()
    for v in sorted(graph.nodes):
        if v not in covered:
            report.node_cover = False
            report.uncovered_node = v
            break

    for u, v in sorted(graph.edges):
        if not any(u in b and v in b for b in td.bags):
            report.edge_cover = False
            report.uncovered_edge = (u, v)
            break

    if report.is_tree:
        for v in sorted(covered):
            holding = {i for i, b in enumerate(td.bags) if v in b}
            # connected iff exactly one holding bag has a parent outside the set
            tops = [i for i in holding if td.parent[i] not in holding]
            if len(tops) != 1:
                report.running_intersection = False
                report.disconnected_node = v
                break
    else:
        report.running_intersection = False
    return report


# --- construction -----------------------------------------------------------


def _is_clique(adj: dict[int, set[int]], vs) -> bool:
    vs = list(vs)
    for a in range(len(vs)):
        nb = adj[vs[a]]
        for b in range(a + 1, len(vs)):
            if vs[b] not in nb:
                return False
    return True


def _fill_in(adj: dict[int, set[int]], v: int) -> int:
    nb = sorted(adj[v])
    missing = 0
    for a in range(len(nb)):
        na = adj[nb[a]]
        for b in range(a + 1, len(nb)):
            if nb[b] not in na:
                missing += 1
    return missing


def _almost_simplicial(adj: dict[int, set[int]], v: int) -> bool:
    nb = adj[v]
    return any(_is_clique(adj, nb - {u}) for u in nb)


def minor_min_width(graph: Graph) -> int:
    """Treewidth lower bound by repeated min-degree edge contraction."""
    adj = {v: set(nb) for v, nb in graph.adjacency.items()}
    bound = 0
    while adj:
        d, u = min((len(nb), v) for v, nb in adj.items())
        bound = max(bound, d)
        nb = adj.pop(u)
        for w in nb:
            adj[w].discard(u)
        if nb:
            _, w = min((len(adj[x] & nb), x) for x in nb)
            for x in nb - {w}:
                adj[x].add(w)
                adj[w].add(x)
    return bound


def elimination_order(graph: Graph) -> list[int]:
    adj = {v: set(nb) for v, nb in graph.adjacency.items()}
    lower = minor_min_width(graph)
    current_width = 0
    order = []
    while adj:
        nodes = sorted(adj)
        pick = next((v for v in nodes if _is_clique(adj, adj[v])), None)
        if pick is None:
            bound = max(lower, current_width)
            pick = next((v for v in nodes if len(adj[v]) <= bound and _almost_simplicial(adj, v)), None)
        if pick is None:
            pick = min(nodes, key=lambda v: (_fill_in(adj, v), v))
        current_width = max(current_width, len(adj[pick]))
        nb = adj.pop(pick)
        for w in nb:
            adj[w].discard(pick)
            adj[w] |= nb - {w}
        order.append(pick)
    return order


def from_elimination_order(graph: Graph, order: Sequence[int]) -> TreeDecomposition:
    """Standard elimination-tree construction; the last vertex's bag is the root."""
    position = {v: i for i, v in enumerate(order)}
    adj = {v: set(nb) for v, nb in graph.adjacency.items()}
    bags: list[frozenset[int]] = []
    parent: list[Optional[int]] = []
    for v in order:
        nb = adj.pop(v)
        for w in nb:
            adj[w].discard(v)
            adj[w] |= nb - {w}
        bags.append(frozenset(nb | {v}))
        parent.append(min((position[w] for w in nb), default=None))
    roots = [i for i, p in enumerate(parent) if p is None]
    if len(roots) != 1:
        raise ValueError("elimination order produced a forest; graph is disconnected")
    return TreeDecomposition(tuple(bags), tuple(parent), roots[0])


def prune_redundant(td: TreeDecomposition) -> TreeDecomposition:
    """Contract every tree edge whose one bag is a subset of the other."""
    bags = list(td.bags)
    parent = list(td.parent)
    alive = [True] * len(bags)
    root = td.root
    changed = True
    while changed:
        changed = False
        for i in range(len(bags)):
            p = parent[i]
            if not alive[i] or p is None:
                continue
            if bags[i] <= bags[p] or bags[p] <= bags[i]:
                # keep the larger bag at the parent's position, drop bag i
                bags[p] = bags[p] | bags[i]
                alive[i] = False
                for j in range(len(bags)):
                    if alive[j] and parent[j] == i:
                        parent[j] = p
                changed = True
    keep = [i for i in range(len(bags)) if alive[i]]
    remap = {old: new for new, old in enumerate(keep)}
    return TreeDecomposition(
        tuple(bags[i] for i in keep),
        tuple(None if parent[i] is None else remap[parent[i]] for i in keep),
        remap[root],
    )


def decompose(graph: Graph) -> TreeDecomposition:
    if not graph.nodes:
        raise ValueError("cannot decompose an empty graph")
    if not graph.is_connected():
        raise ValueError("graph must be connected")
    return prune_redundant(from_elimination_order(graph, elimination_order(graph)))


def binarize(td: TreeDecomposition) -> TreeDecomposition:
    """Split bags with more than two children into left-leaning chains of copies."""
    bags = list(td.bags)
    parent = list(td.parent)
    for i in range(len(td.bags)):
        kids = list(td.children[i])
        if len(kids) <= 2:
            continue
        link = i
        # copy k (k = 0..c-2) holds kids[k] plus the next link; the last holds two kids
        for k in range(len(kids) - 2):
            parent[kids[k]] = link
            bags.append(td.bags[i])
            parent.append(link)
            link = len(bags) - 1
        parent[kids[-2]] = link
        parent[kids[-1]] = link
    return TreeDecomposition(tuple(bags), tuple(parent), td.root)


# --- edge assignment ------------------------------------------------------


def edge_top_bags(td: TreeDecomposition, graph: Graph) -> dict[Edge, int]:
    """Map every edge to the shallowest bag containing both endpoints."""
    depth = td.depth
    top: dict[Edge, int] = {}
    for u, v in graph.edges:
        best = None
        for i, bag in enumerate(td.bags):
            if u in bag and v in bag and (best is None or depth[i] < depth[best]):
                best = i
        if best is None:
            raise ValueError(f"edge ({u}, {v}) is not covered by any bag")
        top[(u, v)] = best
    return top


def terminal_edges(td: TreeDecomposition, graph: Graph) -> list[set[Edge]]:
    """Edges first seen at each bag: H_bag minus the children's subgraphs."""
    out: list[set[Edge]] = [set() for _ in td.bags]
    for e, i in edge_top_bags(td, graph).items():
        out[i].add(e)
    return out


def bag_edge_subgraph(td: TreeDecomposition, graph: Graph, bag_index: int) -> set[Edge]:
    """All edges whose containing bags lie in the subtree rooted at ``bag_index``."""
    subtree = set()
    stack = [bag_index]
    while stack:
        i = stack.pop()
        subtree.add(i)
        stack.extend(td.children[i])
    result = set()
    for u, v in graph.edges:
        holders = [i for i, b in enumerate(td.bags) if u in b and v in b]
        if holders and all(i in subtree for i in holders):
            result.add((u, v))
    return result
