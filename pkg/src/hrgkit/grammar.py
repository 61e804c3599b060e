"""HRG rule extraction, canonical forms, and count/probability tables."""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field, replace
from itertools import permutations, product
from typing import Iterable, Sequence

from .graphcore import Graph
from .treedecomp import TreeDecomposition, terminal_edges


class NormalizationError(ValueError):
    pass


class GrammarFormatError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Nonterminal:
    arity: int
    sub: int = 1

    def __post_init__(self):
        if self.arity < 0 or self.sub < 1:
            raise ValueError(f"invalid nonterminal N^{self.arity}_{self.sub}")

    def __str__(self):
        return f"N^{self.arity}_{self.sub}"


START = Nonterminal(0, 1)

Attachment = tuple[int, ...]


@dataclass(frozen=True)
class RuleRHS:
    """Hypergraph fragment on positions ``0..node_count-1``.

    Canonical fragments list external positions first.  Nonterminal edges
    are an ordered tuple; the order is what subsymbol indices refer to.
    """

    node_count: int
    external: frozenset[int]
    terminal_edges: frozenset[tuple[int, int]]
    nonterminal_edges: tuple[tuple[Nonterminal, Attachment], ...] = ()

    def __post_init__(self):
        for label, att in self.nonterminal_edges:
            if len(att) != label.arity:
                raise ValueError(f"hyperedge {label} attached to {len(att)} nodes")

    @property
    def rank(self) -> int:
        return len(self.nonterminal_edges)

    def skeleton(self) -> "RuleRHS":
        """The same fragment with every nonterminal reset to subsymbol 1."""
        if all(lab.sub == 1 for lab, _ in self.nonterminal_edges):
            return self
        nts = tuple((Nonterminal(lab.arity), att) for lab, att in self.nonterminal_edges)
        return replace(self, nonterminal_edges=nts)

    def with_subsymbols(self, subs: Sequence[int]) -> "RuleRHS":
        nts = tuple((Nonterminal(lab.arity, s), att) for (lab, att), s in zip(self.nonterminal_edges, subs))
        return replace(self, nonterminal_edges=nts)


@dataclass(frozen=True)
class Rule:
    lhs: Nonterminal
    rhs: RuleRHS
    weight: float = 1.0


# --- canonical forms --------------------------------------------------------


def _rank(signatures: list) -> list[int]:
    table = {s: i for i, s in enumerate(sorted(set(signatures)))}
    return [table[s] for s in signatures]


def _refine_colors(n, external, edges, nts) -> list[int]:
    nbrs: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        nbrs[u].append(v)
        nbrs[v].append(u)
    incident: list[list[int]] = [[] for _ in range(n)]
    for k, (_, att) in enumerate(nts):
        for x in att:
            incident[x].append(k)
    colors = _rank([
        (0 if v in external else 1, len(nbrs[v]),
         tuple(sorted((nts[k][0].arity, nts[k][0].sub) for k in incident[v])))
        for v in range(n)
    ])
    while True:
        sigs = [
            (colors[v],
             tuple(sorted(colors[w] for w in nbrs[v])),
             tuple(sorted((nts[k][0].arity, nts[k][0].sub,
                           tuple(sorted(colors[x] for x in nts[k][1] if x != v)))
                          for k in incident[v])))
            for v in range(n)
        ]
        refined = _rank(sigs)
        if len(set(refined)) == len(set(colors)):
            return refined
        colors = refined


def _canonical_labeling(n, external, edges, nts) -> tuple[tuple, dict[int, int]]:
    colors = _refine_colors(n, external, edges, nts)
    classes: dict[int, list[int]] = defaultdict(list)
    for v in range(n):
        classes[colors[v]].append(v)
    cells = [classes[c] for c in sorted(classes)]
    best = None
    best_pos: dict[int, int] = {}
    for combo in product(*(permutations(cell) for cell in cells)):
        pos = {}
        for block in combo:
            for v in block:
                pos[v] = len(pos)
        enc = (
            tuple(sorted((min(pos[u], pos[v]), max(pos[u], pos[v])) for u, v in edges)),
            tuple(sorted((lab.arity, lab.sub, tuple(sorted(pos[x] for x in att))) for lab, att in nts)),
        )
        if best is None or enc < best:
            best, best_pos = enc, pos
    return best, best_pos


def _canonical_rhs(nodes: Sequence, external, edges, nts) -> tuple[RuleRHS, list[int]]:
    """Canonicalize a fragment given on arbitrary node labels.

    Returns the canonical RHS and, for each input nonterminal edge, its index
    in the canonical nonterminal-edge tuple.
    """
    index = {v: i for i, v in enumerate(nodes)}
    ext = {index[v] for v in external}
    es = [(index[u], index[v]) for u, v in edges]
    hs = [(lab, tuple(index[x] for x in att)) for lab, att in nts]
    _, pos = _canonical_labeling(len(nodes), ext, es, hs)
    mapped = [(lab, tuple(sorted(pos[x] for x in att))) for lab, att in hs]
    order = sorted(range(len(mapped)), key=lambda k: (mapped[k][0].arity, mapped[k][0].sub, mapped[k][1], k))
    rhs = RuleRHS(
        node_count=len(nodes),
        external=frozenset(pos[x] for x in ext),
        terminal_edges=frozenset((min(pos[u], pos[v]), max(pos[u], pos[v])) for u, v in es),
        nonterminal_edges=tuple(mapped[k] for k in order),
    )
    slot = [0] * len(order)
    for new, old in enumerate(order):
        slot[old] = new
    return rhs, slot


def canonicalize(rhs: RuleRHS) -> RuleRHS:
    out, _ = _canonical_rhs(range(rhs.node_count), rhs.external, rhs.terminal_edges, rhs.nonterminal_edges)
    return out


# --- extraction -------------------------------------------------------------


@dataclass(frozen=True)
class BagRule:
    """The unsplit rule used at one bag, with child bags in hyperedge order."""

    lhs_arity: int
    rhs: RuleRHS
    children: tuple[int, ...]


@dataclass(frozen=True)
class RuleTree:
    """A decomposition reduced to its rule skeletons: the input to inside-outside."""

    bags: tuple[BagRule, ...]
    root: int

    def postorder(self) -> list[int]:
        out = []
        stack = [self.root]
        while stack:
            i = stack.pop()
            out.append(i)
            stack.extend(self.bags[i].children)
        return out[::-1]


def _bag_rule(td: TreeDecomposition, i: int, local_edges) -> BagRule:
    nodes = sorted(td.bags[i])
    kids = td.children[i]
    nts = [(Nonterminal(len(td.sepset(c))), tuple(sorted(td.sepset(c)))) for c in kids]
    rhs, slot = _canonical_rhs(nodes, td.sepset(i), sorted(local_edges), nts)
    ordered = [0] * len(kids)
    for k, c in enumerate(kids):
        ordered[slot[k]] = c
    return BagRule(len(td.sepset(i)), rhs, tuple(ordered))


def extract_rule(td: TreeDecomposition, graph: Graph, bag_index: int) -> Rule:
    local = terminal_edges(td, graph)[bag_index]
    br = _bag_rule(td, bag_index, local)
    return Rule(Nonterminal(br.lhs_arity), br.rhs, 1.0)


def extract_rule_tree(td: TreeDecomposition, graph: Graph) -> RuleTree:
    local = terminal_edges(td, graph)
    return RuleTree(tuple(_bag_rule(td, i, local[i]) for i in range(len(td.bags))), td.root)


# --- grammars ---------------------------------------------------------------


@dataclass
class Grammar:
    """Rules grouped by LHS.  Weights are counts or probabilities."""

    split_count: int = 1
    rules: dict[Nonterminal, dict[RuleRHS, float]] = field(default_factory=dict)

    def add(self, lhs: Nonterminal, rhs: RuleRHS, weight: float) -> None:
        table = self.rules.setdefault(lhs, {})
        table[rhs] = table.get(rhs, 0.0) + weight

    def rule_list(self) -> list[Rule]:
        return [Rule(lhs, rhs, w) for lhs in sorted(self.rules) for rhs, w in self.rules[lhs].items()]

    def size(self) -> int:
        return sum(1 for table in self.rules.values() for w in table.values() if w > 0)

    def probability(self, lhs: Nonterminal, rhs: RuleRHS) -> float:
        return self.rules.get(lhs, {}).get(rhs, 0.0)

    def copy(self) -> "Grammar":
        return Grammar(self.split_count, {lhs: dict(t) for lhs, t in self.rules.items()})


def grammar_from_tree(tree: RuleTree) -> Grammar:
    g = Grammar()
    for br in tree.bags:
        g.add(Nonterminal(br.lhs_arity), br.rhs, 1.0)
    return g


def extract_grammar(graph: Graph, td: TreeDecomposition) -> Grammar:
    """Rule counts (not probabilities) from one rooted, binarized decomposition."""
    return grammar_from_tree(extract_rule_tree(td, graph))


def normalize(grammar: Grammar) -> Grammar:
    out = Grammar(grammar.split_count)
    for lhs in sorted(grammar.rules):
        table = grammar.rules[lhs]
        if any(w < 0 for w in table.values()):
            raise NormalizationError(f"negative weight under {lhs}")
        total = sum(table.values())
        if total <= 0:
            raise NormalizationError(f"LHS {lhs} has zero total weight")
        out.rules[lhs] = {rhs: w / total for rhs, w in table.items() if w > 0}
    return out


def sum_counts(grammars: Iterable[Grammar]) -> Grammar:
    grammars = list(grammars)
    splits = {g.split_count for g in grammars}
    if len(splits) > 1:
        raise ValueError(f"cannot merge grammars with split counts {sorted(splits)}")
    out = Grammar(splits.pop() if splits else 1)
    for g in grammars:
        for lhs, table in g.rules.items():
            for rhs, w in table.items():
                out.add(lhs, rhs, w)
    return out


def merge_grammars(grammars: Iterable[Grammar]) -> Grammar:
    return normalize(sum_counts(grammars))


# --- text format ------------------------------------------------------------


def format_rule(lhs: Nonterminal, rhs: RuleRHS, weight: float) -> str:
    ext = ",".join(str(p) for p in sorted(rhs.external))
    terms = ";".join(f"{u}-{v}" for u, v in sorted(rhs.terminal_edges))
    nts = "|".join(f"{lab.arity}_{lab.sub}:({','.join(map(str, att))})" for lab, att in rhs.nonterminal_edges)
    return f"{lhs} -> nodes={rhs.node_count} ext={ext} T={terms} NT={nts} w={weight!r}"


def _rule_sort_key(item):
    lhs, rhs, w = item
    return (lhs, format_rule(lhs, rhs, 0.0))


def serialize(grammar: Grammar) -> str:
    items = [(lhs, rhs, w) for lhs, table in grammar.rules.items() for rhs, w in table.items()]
    lines = [format_rule(lhs, rhs, w) for lhs, rhs, w in sorted(items, key=_rule_sort_key)]
    return "".join(line + "\n" for line in lines)


_RULE_RE = re.compile(
    r"^N\^(\d+)_(\d+) -> nodes=(\d+) ext=([\d,]*) T=([\d\-;]*) NT=(\S*) w=(\S+)$"
)
_NT_RE = re.compile(r"^(\d+)_(\d+):\(([\d,]*)\)$")


def _ints(text: str, sep: str = ",") -> list[int]:
    return [int(x) for x in text.split(sep)] if text else []


def parse_rule(line: str) -> Rule:
    m = _RULE_RE.match(line.strip())
    if not m:
        raise GrammarFormatError(f"unparseable rule line: {line!r}")
    arity, sub, nodes, ext, terms, nts, w = m.groups()
    edges = []
    for chunk in filter(None, terms.split(";")):
        u, v = chunk.split("-")
        edges.append((int(u), int(v)))
    hyper = []
    for chunk in filter(None, nts.split("|")):
        hm = _NT_RE.match(chunk)
        if not hm:
            raise GrammarFormatError(f"bad nonterminal edge {chunk!r} in {line!r}")
        hyper.append((Nonterminal(int(hm.group(1)), int(hm.group(2))), tuple(_ints(hm.group(3)))))
    rhs = RuleRHS(int(nodes), frozenset(_ints(ext)), frozenset(edges), tuple(hyper))
    return Rule(Nonterminal(int(arity), int(sub)), rhs, float(w))


def parse_grammar(text: str, split_count: int | None = None) -> Grammar:
    g = Grammar()
    top = 1
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        r = parse_rule(line)
        g.add(r.lhs, r.rhs, r.weight)
        top = max([top, r.lhs.sub] + [lab.sub for lab, _ in r.rhs.nonterminal_edges])
    g.split_count = split_count if split_count is not None else top
    return g


def dump_grammar(grammar: Grammar, min_probability: float = 0.0, max_externals: float = float("inf")) -> str:
    """Serialized rules passing both thresholds, by LHS then descending probability."""
    items = [
        (lhs, rhs, w)
        for lhs, table in grammar.rules.items()
        for rhs, w in table.items()
        if w >= min_probability and len(rhs.external) <= max_externals
    ]
    items.sort(key=lambda it: (it[0], -it[2], format_rule(it[0], it[1], 0.0)))
    return "".join(format_rule(*it) + "\n" for it in items)
