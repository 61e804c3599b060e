"""Latent subsymbol refinement trained with inside-outside EM.

Rule probabilities are held per unsplit rule as dense arrays indexed
``[lhs_sub, child1_sub, child2_sub, ...]`` (zero-based).  The start symbol
is never split, so its LHS axis has length 1; so does any axis for an
arity-0 hyperedge.  All chart arithmetic happens in log space.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .grammar import Grammar, Nonterminal, RuleRHS, RuleTree

log = logging.getLogger(__name__)

RuleKey = tuple[int, RuleRHS]  # (lhs arity, unsplit canonical RHS)


class UnknownRuleError(KeyError):
    def __init__(self, key: RuleKey):
        super().__init__(key)
        self.key = key

    def __str__(self):
        from .grammar import format_rule

        arity, rhs = self.key
        return "rule not in grammar: " + format_rule(Nonterminal(arity), rhs, 0.0)


class ZeroLikelihoodError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SplitConfig:
    n: int = 2
    jitter: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("split count must be >= 1")
        if not 0.0 <= self.jitter < 1.0:
            raise ValueError("jitter must lie in [0, 1)")


@dataclass(frozen=True)
class EmConfig:
    """Stopping rule: after ``min_iterations``, stop once the relative
    log-likelihood gain drops below ``rel_tolerance``.

    Split grammars start near a symmetric saddle where the first iterations
    barely move, hence the minimum.  Probabilities below ``prune_below`` are
    zeroed after training so they cannot underflow downstream.
    """

    max_iterations: int = 50
    rel_tolerance: float = 1e-4
    min_iterations: int = 20
    prune_below: float = 1e-100
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1 or self.rel_tolerance <= 0:
            raise ValueError("max_iterations must be >= 1 and rel_tolerance > 0")
        if self.min_iterations < 1 or self.prune_below < 0:
            raise ValueError("min_iterations must be >= 1 and prune_below >= 0")


def sub_count(arity: int, n: int) -> int:
    return 1 if arity == 0 else n


def table_shape(key: RuleKey, n: int) -> tuple[int, ...]:
    arity, rhs = key
    return (sub_count(arity, n),) + tuple(sub_count(lab.arity, n) for lab, _ in rhs.nonterminal_edges)


class RuleTables:
    """Dense per-rule probability (or count) arrays for an n-split grammar."""

    def __init__(self, n: int, tables: Optional[dict[RuleKey, np.ndarray]] = None):
        self.n = n
        self.tables: dict[RuleKey, np.ndarray] = tables if tables is not None else {}
        self._logs: dict[RuleKey, np.ndarray] = {}

    @classmethod
    def from_grammar(cls, grammar: Grammar) -> "RuleTables":
        n = grammar.split_count
        out = cls(n)
        for lhs, table in grammar.rules.items():
            for rhs, w in table.items():
                key = (lhs.arity, rhs.skeleton())
                arr = out.tables.get(key)
                if arr is None:
                    arr = out.tables[key] = np.zeros(table_shape(key, n))
                idx = (lhs.sub - 1,) + tuple(lab.sub - 1 for lab, _ in rhs.nonterminal_edges)
                arr[idx] += w
        return out

    def to_grammar(self) -> Grammar:
        g = Grammar(self.n)
        for key in sorted(self.tables, key=_key_order):
            arity, skel = key
            arr = self.tables[key]
            for idx in zip(*np.nonzero(arr)):
                lhs = Nonterminal(arity, int(idx[0]) + 1)
                g.add(lhs, skel.with_subsymbols([int(s) + 1 for s in idx[1:]]), float(arr[idx]))
        return g

    def log_table(self, key: RuleKey) -> np.ndarray:
        cached = self._logs.get(key)
        if cached is None:
            arr = self.tables.get(key)
            if arr is None:
                raise UnknownRuleError(key)
            with np.errstate(divide="ignore"):
                cached = self._logs[key] = np.log(arr)
        return cached

    def __contains__(self, key) -> bool:
        return key in self.tables

    def normalized(self) -> "RuleTables":
        """Divide by per-(lhs arity, lhs subsymbol) totals across all rules."""
        totals: dict[int, np.ndarray] = {}
        for (arity, _), arr in self.tables.items():
            flat = arr.reshape(arr.shape[0], -1).sum(axis=1)
            totals[arity] = totals.get(arity, 0.0) + flat
        out = {}
        for key, arr in self.tables.items():
            tot = totals[key[0]]
            with np.errstate(divide="ignore", invalid="ignore"):
                scaled = arr / tot.reshape((-1,) + (1,) * (arr.ndim - 1))
            out[key] = np.where(np.isfinite(scaled), scaled, 0.0)
        return RuleTables(self.n, out)


def _key_order(key: RuleKey):
    from .grammar import format_rule

    arity, rhs = key
    return (arity, format_rule(Nonterminal(arity), rhs, 0.0))


def split_grammar(grammar: Grammar, cfg: SplitConfig) -> Grammar:
    """Replace each rule by all subsymbol combinations, splitting its mass evenly.

    With ``n > 1`` each subrule weight is perturbed by a multiplicative factor
    in ``[1 - jitter, 1 + jitter]`` before renormalizing; with ``n = 1`` the
    grammar is returned unchanged.
    """
    if grammar.split_count != 1:
        raise ValueError("split_grammar expects an unsplit grammar")
    n = cfg.n
    if n == 1:
        return grammar.copy()
    rng = np.random.default_rng(cfg.seed)
    base = RuleTables.from_grammar(grammar)
    tables = {}
    for key in sorted(base.tables, key=_key_order):
        p = float(base.tables[key].reshape(-1)[0])
        shape = table_shape(key, n)
        per_lhs = int(np.prod(shape[1:]))
        arr = np.full(shape, p / per_lhs)
        if cfg.jitter > 0:
            arr = arr * (1.0 + rng.uniform(-cfg.jitter, cfg.jitter, size=shape))
        tables[key] = arr
    return RuleTables(n, tables).normalized().to_grammar()


# --- inside / outside -------------------------------------------------------


def _lse(a: np.ndarray, axis=None) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - safe), axis=axis, keepdims=True)) + safe
    if axis is None:
        return out.reshape(())
    return np.squeeze(out, axis=axis)


@dataclass
class ChartTables:
    inside: list[np.ndarray]
    outside: list[Optional[np.ndarray]] = field(default_factory=list)
    log_likelihood: float = -math.inf

    @property
    def tree_likelihood(self) -> float:
        return math.exp(self.log_likelihood)


def _key(tree: RuleTree, i: int) -> RuleKey:
    br = tree.bags[i]
    return (br.lhs_arity, br.rhs)


def compute_inside(tree: RuleTree, params: RuleTables) -> ChartTables:
    inside: list[Optional[np.ndarray]] = [None] * len(tree.bags)
    for i in tree.postorder():
        logp = params.log_table(_key(tree, i))
        kids = tree.bags[i].children
        if not kids:
            inside[i] = logp.copy()
        elif len(kids) == 1:
            inside[i] = _lse(logp + inside[kids[0]][None, :], axis=1)
        elif len(kids) == 2:
            a, b = inside[kids[0]], inside[kids[1]]
            inside[i] = _lse((logp + a[None, :, None] + b[None, None, :]).reshape(logp.shape[0], -1), axis=1)
        else:
            raise ValueError(f"bag {i} has {len(kids)} children; binarize first")
    root = inside[tree.root]
    return ChartTables(inside, [None] * len(tree.bags), float(root[0]))


def compute_outside(tree: RuleTree, params: RuleTables, chart: ChartTables) -> ChartTables:
    outside: list[Optional[np.ndarray]] = [None] * len(tree.bags)
    root_in = chart.inside[tree.root]
    outside[tree.root] = np.full(root_in.shape, -math.inf)
    outside[tree.root][0] = 0.0
    for i in reversed(tree.postorder()):
        kids = tree.bags[i].children
        if not kids:
            continue
        logp = params.log_table(_key(tree, i))
        out = outside[i]
        if len(kids) == 1:
            outside[kids[0]] = _lse(out[:, None] + logp, axis=0)
        else:
            a, b = chart.inside[kids[0]], chart.inside[kids[1]]
            t = out[:, None, None] + logp
            outside[kids[0]] = _lse(np.moveaxis(t + b[None, None, :], 1, 0).reshape(len(a), -1), axis=1)
            outside[kids[1]] = _lse(np.moveaxis(t + a[None, :, None], 2, 0).reshape(len(b), -1), axis=1)
    chart.outside = outside
    return chart


def run_chart(tree: RuleTree, params: RuleTables) -> ChartTables:
    return compute_outside(tree, params, compute_inside(tree, params))


class ExpectedCounts:
    """Expected subrule usage, keyed like :class:`RuleTables`."""

    def __init__(self, n: int):
        self.n = n
        self.tables: dict[RuleKey, np.ndarray] = {}

    def add(self, key: RuleKey, posterior: np.ndarray) -> None:
        cur = self.tables.get(key)
        if cur is None:
            self.tables[key] = posterior.copy()
        else:
            cur += posterior

    def merge(self, other: "ExpectedCounts") -> "ExpectedCounts":
        out = ExpectedCounts(self.n)
        for src in (self, other):
            for key, arr in src.tables.items():
                out.add(key, arr)
        return out

    def total(self) -> float:
        return float(sum(arr.sum() for arr in self.tables.values()))

    def as_rule_counts(self) -> dict[tuple[Nonterminal, RuleRHS], float]:
        g = RuleTables(self.n, self.tables).to_grammar()
        return {(lhs, rhs): w for lhs, t in g.rules.items() for rhs, w in t.items()}


def accumulate_expected_counts(tree: RuleTree, params: RuleTables, chart: ChartTables,
                               counts: Optional[ExpectedCounts] = None) -> ExpectedCounts:
    if counts is None:
        counts = ExpectedCounts(params.n)
    ll = chart.log_likelihood
    if not np.isfinite(ll):
        raise ZeroLikelihoodError("tree has zero probability under the grammar; smoothing is required")
    for i in range(len(tree.bags)):
        key = _key(tree, i)
        logp = params.log_table(key)
        kids = tree.bags[i].children
        out = chart.outside[i]
        t = out.reshape((-1,) + (1,) * len(kids)) + logp
        if len(kids) >= 1:
            t = t + chart.inside[kids[0]].reshape((1, -1) + (1,) * (len(kids) - 1))
        if len(kids) == 2:
            t = t + chart.inside[kids[1]][None, None, :]
        counts.add(key, np.exp(t - ll))
    return counts


def corpus_log_likelihood(trees: Iterable[RuleTree], params: RuleTables) -> float:
    return float(sum(compute_inside(t, params).log_likelihood for t in trees))


def em_step(trees: Sequence[RuleTree], params: RuleTables) -> tuple[float, RuleTables]:
    """One E+M step; returns the corpus log-likelihood under ``params``."""
    counts = ExpectedCounts(params.n)
    total = 0.0
    for tree in trees:
        chart = run_chart(tree, params)
        total += chart.log_likelihood
        accumulate_expected_counts(tree, params, chart, counts)
    # rules unused by the corpus get zero counts and drop out
    tables = {key: counts.tables.get(key, np.zeros_like(arr)) for key, arr in params.tables.items()}
    return total, RuleTables(params.n, tables).normalized()


def em_train(grammar: Grammar, trees: Sequence[RuleTree], cfg: EmConfig) -> tuple[Grammar, list[float]]:
    params = RuleTables.from_grammar(grammar)
    for tree in trees:
        for i in range(len(tree.bags)):
            if _key(tree, i) not in params:
                raise UnknownRuleError(_key(tree, i))
    trace: list[float] = []
    for it in range(cfg.max_iterations):
        ll, params = em_step(trees, params)
        trace.append(ll)
        log.info("EM iteration %d: log-likelihood %.6f", it + 1, ll)
        if len(trace) > 1 and len(trace) >= cfg.min_iterations:
            prev = trace[-2]
            if abs(ll - prev) <= cfg.rel_tolerance * abs(prev):
                break
    if cfg.prune_below > 0:
        pruned = {k: np.where(a < cfg.prune_below, 0.0, a) for k, a in params.tables.items()}
        params = RuleTables(params.n, pruned).normalized()
    return params.to_grammar(), trace


def format_trace(trace: Sequence[float]) -> str:
    return "".join(f"{i}\t{ll!r}\n" for i, ll in enumerate(trace, start=1))
