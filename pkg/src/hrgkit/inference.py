"""Held-out scoring and random generation under a trained grammar."""

from __future__ import annotations

import json
import math
import random
import statistics
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grammar import START, Grammar, Nonterminal, RuleRHS, RuleTree, extract_rule_tree
from .graphcore import Graph
from .latent import RuleTables, compute_inside, table_shape
from .treedecomp import binarize, decompose


class SmoothingConfigError(ValueError):
    pass


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SmoothingReport:
    unknown_rule_types: int
    unknown_rule_uses: int
    epsilon: float
    raw_log_likelihood: float
    adjusted_log_likelihood: float

    def to_json(self) -> str:
        return json.dumps({
            "raw_ll": self.raw_log_likelihood,
            "adjusted_ll": self.adjusted_log_likelihood,
            "unknown_types": self.unknown_rule_types,
            "unknown_uses": self.unknown_rule_uses,
            "epsilon": self.epsilon,
        })


def decomposed_rule_tree(graph: Graph) -> RuleTree:
    return extract_rule_tree(binarize(decompose(graph)), graph)


def smallest_probability(grammar: Grammar) -> float:
    return min((w for t in grammar.rules.values() for w in t.values() if w > 0), default=1.0)


def score_tree(params: RuleTables, tree: RuleTree, epsilon: float) -> SmoothingReport:
    """Score a rule tree, adding every unknown rule at probability ``epsilon``."""
    extra = {}
    uses = 0
    for br in tree.bags:
        key = (br.lhs_arity, br.rhs)
        if key not in params:
            uses += 1
            if key not in extra:
                extra[key] = np.full(table_shape(key, params.n), epsilon)
    augmented = RuleTables(params.n, {**params.tables, **extra}) if extra else params
    raw = compute_inside(tree, augmented).log_likelihood
    return SmoothingReport(len(extra), uses, epsilon, raw, raw - uses * math.log(epsilon))


def score_graph(train_grammar: Grammar, test_graph: Graph, epsilon: float = 1e-10) -> SmoothingReport:
    """Log-likelihood of ``test_graph`` via its own deterministic decomposition.

    Known rule probabilities are left as they are; each unknown rule (and
    each of its subsymbol variants) is added with probability ``epsilon``,
    and its contribution is subtracted again in the adjusted score.
    """
    if not 0.0 < epsilon < smallest_probability(train_grammar):
        raise SmoothingConfigError("epsilon must be positive and below the smallest known rule probability")
    return score_tree(RuleTables.from_grammar(train_grammar), decomposed_rule_tree(test_graph), epsilon)


@dataclass(frozen=True)
class HeldOutSummary:
    reports: tuple[SmoothingReport, ...]
    mean: float
    ci95: float

    @property
    def interval(self) -> tuple[float, float]:
        return (self.mean - self.ci95, self.mean + self.ci95)


def mean_ci95(values: Sequence[float]) -> tuple[float, float]:
    """Mean and normal-approximation half-width 1.96 * s / sqrt(k)."""
    if len(values) < 2:
        raise ValueError("need at least two values for a confidence interval")
    return statistics.fmean(values), 1.96 * statistics.stdev(values) / math.sqrt(len(values))


def evaluate_testset(train_grammar: Grammar, test_graphs: Sequence[Graph], epsilon: float = 1e-10) -> HeldOutSummary:
    reports = tuple(score_graph(train_grammar, g, epsilon) for g in test_graphs)
    mean, half = mean_ci95([r.adjusted_log_likelihood for r in reports])
    return HeldOutSummary(reports, mean, half)


# --- generation -------------------------------------------------------------


@dataclass(frozen=True)
class GenerationLimits:
    max_nonterminal_expansions: int = 10_000
    max_nodes: int = 10_000
    max_retries: int = 100

    def __post_init__(self):
        if min(self.max_nonterminal_expansions, self.max_nodes, self.max_retries) < 1:
            raise ValueError("generation limits must be positive")


class _Sampler:
    def __init__(self, grammar: Grammar):
        self.choices: dict[Nonterminal, tuple[list[RuleRHS], list[float]]] = {}
        for lhs, table in grammar.rules.items():
            items = sorted(((rhs, w) for rhs, w in table.items() if w > 0), key=lambda it: repr(it[0]))
            if items:
                rhss, ws = zip(*items)
                self.choices[lhs] = (list(rhss), list(np.cumsum(ws)))

    def draw(self, lhs: Nonterminal, rng: random.Random) -> RuleRHS:
        entry = self.choices.get(lhs)
        if entry is None:
            raise GenerationError(f"no rules for {lhs}")
        rhss, cum = entry
        return rng.choices(rhss, cum_weights=cum)[0]


class _LimitExceeded(Exception):
    pass


def _derive(sampler: _Sampler, limits: GenerationLimits, rng: random.Random) -> Graph:
    node_count = 0
    edges: set[tuple[int, int]] = set()
    queue: deque[tuple[Nonterminal, tuple[int, ...]]] = deque([(START, ())])
    expansions = 0
    while queue:
        label, attached = queue.popleft()
        expansions += 1
        if expansions > limits.max_nonterminal_expansions:
            raise _LimitExceeded
        rhs = sampler.draw(label, rng)
        ext = sorted(rhs.external)
        if len(ext) != len(attached):
            raise GenerationError(f"rule for {label} has {len(ext)} external nodes, hyperedge has {len(attached)}")
        order = list(attached)
        rng.shuffle(order)
        mapping = dict(zip(ext, order))
        for p in range(rhs.node_count):
            if p not in mapping:
                mapping[p] = node_count
                node_count += 1
        if node_count > limits.max_nodes:
            raise _LimitExceeded
        for u, v in rhs.terminal_edges:
            a, b = mapping[u], mapping[v]
            edges.add((a, b) if a < b else (b, a))
        for lab, att in rhs.nonterminal_edges:
            queue.append((lab, tuple(mapping[x] for x in att)))
    return Graph.from_edges(edges, range(node_count))


def generate_graph(grammar: Grammar, limits: GenerationLimits = GenerationLimits(), seed: int = 0) -> Graph:
    if START not in grammar.rules:
        raise GenerationError("grammar has no start rules")
    sampler = _Sampler(grammar)
    rng = random.Random(seed)
    for _ in range(limits.max_retries):
        try:
            return _derive(sampler, limits, rng)
        except _LimitExceeded:
            continue
    raise GenerationError(f"no derivation within limits after {limits.max_retries} attempts")


def generate_sized(grammar: Grammar, target_nodes: int, tolerance: int = 0,
                   limits: GenerationLimits = GenerationLimits(), seed: int = 0) -> Graph:
    """Rejection-sample derivations until the node count is within ``tolerance``."""
    if START not in grammar.rules:
        raise GenerationError("grammar has no start rules")
    sampler = _Sampler(grammar)
    rng = random.Random(seed)
    closest = None
    for _ in range(limits.max_retries):
        try:
            g = _derive(sampler, limits, rng)
        except _LimitExceeded:
            continue
        size = g.number_of_nodes()
        if abs(size - target_nodes) <= tolerance:
            return g
        if closest is None or abs(size - target_nodes) < abs(closest - target_nodes):
            closest = size
    raise GenerationError(
        f"no graph with {target_nodes}±{tolerance} nodes after {limits.max_retries} attempts "
        f"(closest size {closest})"
    )
