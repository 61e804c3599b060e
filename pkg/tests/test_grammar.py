import pytest
from hypothesis import given, settings, strategies as st

from hrgkit.graphcore import generate_barabasi_albert, sample_subgraph
from hrgkit.grammar import (
    START,
    Grammar,
    GrammarFormatError,
    NormalizationError,
    Nonterminal,
    RuleRHS,
    canonicalize,
    dump_grammar,
    extract_grammar,
    extract_rule,
    extract_rule_tree,
    merge_grammars,
    normalize,
    parse_grammar,
    parse_rule,
    serialize,
    sum_counts,
)
from hrgkit.treedecomp import binarize, decompose


@st.composite
def fragments(draw):
    n = draw(st.integers(1, 6))
    ext = draw(st.sets(st.integers(0, n - 1), max_size=min(n, 4)))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = draw(st.sets(st.sampled_from(pairs), max_size=len(pairs))) if pairs else set()
    nts = []
    for _ in range(draw(st.integers(0, 2))):
        att = draw(st.sets(st.integers(0, n - 1), max_size=min(n, 3)))
        sub = draw(st.integers(1, 2))
        nts.append((Nonterminal(len(att), sub), tuple(sorted(att))))
    return RuleRHS(n, frozenset(ext), frozenset(edges), tuple(nts))


def _relabel(rhs, perm):
    return RuleRHS(
        rhs.node_count,
        frozenset(perm[x] for x in rhs.external),
        frozenset(tuple(sorted((perm[u], perm[v]))) for u, v in rhs.terminal_edges),
        tuple((lab, tuple(sorted(perm[x] for x in att))) for lab, att in rhs.nonterminal_edges),
    )


class TestCanonicalForm:
    @given(fragments(), st.randoms(use_true_random=False))
    @settings(max_examples=300, deadline=None)
    def test_relabel_invariant(self, rhs, rnd):
        perm = list(range(rhs.node_count))
        rnd.shuffle(perm)
        assert canonicalize(_relabel(rhs, perm)) == canonicalize(rhs)

    @given(fragments())
    @settings(max_examples=200, deadline=None)
    def test_idempotent(self, rhs):
        once = canonicalize(rhs)
        assert canonicalize(once) == once

    @given(fragments())
    @settings(max_examples=200, deadline=None)
    def test_externals_come_first(self, rhs):
        c = canonicalize(rhs)
        assert c.external == frozenset(range(len(rhs.external)))
        assert len(c.terminal_edges) == len(rhs.terminal_edges)

    def test_distinguishes_external_choice(self):
        path = frozenset({(0, 1), (1, 2)})
        end = canonicalize(RuleRHS(3, frozenset({0}), path))
        middle = canonicalize(RuleRHS(3, frozenset({1}), path))
        assert end != middle

    def test_skeleton_and_subsymbols(self):
        rhs = RuleRHS(3, frozenset({0}), frozenset({(0, 1)}),
                      ((Nonterminal(1, 2), (1,)), (Nonterminal(2, 1), (0, 2))))
        sk = rhs.skeleton()
        assert [lab.sub for lab, _ in sk.nonterminal_edges] == [1, 1]
        assert sk.with_subsymbols([2, 1]) == rhs
        assert rhs.rank == 2

    def test_bad_attachment(self):
        with pytest.raises(ValueError):
            RuleRHS(2, frozenset(), frozenset(), ((Nonterminal(2), (0,)),))


class TestExtraction:
    def test_example_bag_rule(self, fig_graph, fig_td):
        rule = extract_rule(fig_td, fig_graph, 2)
        assert rule.lhs == Nonterminal(3)
        rhs = rule.rhs
        assert rhs.node_count == 4
        assert len(rhs.external) == 3
        (internal,) = set(range(4)) - rhs.external
        assert len(rhs.terminal_edges) == 2
        assert all(internal in e for e in rhs.terminal_edges)
        ((lab, att),) = rhs.nonterminal_edges
        assert lab == Nonterminal(2)
        assert internal in att

    def test_root_rule(self, fig_graph, fig_td):
        rule = extract_rule(fig_td, fig_graph, 0)
        assert rule.lhs == START
        assert rule.rhs.external == frozenset()
        assert sorted(lab.arity for lab, _ in rule.rhs.nonterminal_edges) == [1, 3]

    def test_tree_children_match_hyperedges(self, fig_graph, fig_td):
        tree = extract_rule_tree(fig_td, fig_graph)
        for br in tree.bags:
            assert len(br.children) == br.rhs.rank
            for c, (lab, _) in zip(br.children, br.rhs.nonterminal_edges):
                assert tree.bags[c].lhs_arity == lab.arity

    @pytest.mark.parametrize("seed", range(15))
    def test_terminal_edges_partition_graph(self, seed):
        ba = generate_barabasi_albert(500, 2, seed)
        s = sample_subgraph(ba, 25, seed)
        td = binarize(decompose(s))
        tree = extract_rule_tree(td, s)
        assert sum(len(br.rhs.terminal_edges) for br in tree.bags) == s.number_of_edges()
        # each bag adds its non-external nodes exactly once
        assert sum(br.rhs.node_count - br.lhs_arity for br in tree.bags) == s.number_of_nodes()
        counts = extract_grammar(s, td)
        assert sum(w for t in counts.rules.values() for w in t.values()) == len(td.bags)
        assert set(counts.rules[START].values()) == {1.0}

    def test_relabeled_graph_same_grammar(self, fig_graph, fig_td):
        perm = {v: 100 - v for v in fig_graph.nodes}
        g2 = fig_graph.relabel(perm)
        td2 = type(fig_td)(tuple(frozenset(perm[v] for v in b) for b in fig_td.bags), fig_td.parent, fig_td.root)
        assert extract_grammar(g2, td2).rules == extract_grammar(fig_graph, fig_td).rules


def _toy_counts():
    g = Grammar()
    a = RuleRHS(2, frozenset(), frozenset({(0, 1)}))
    b = RuleRHS(1, frozenset({0}), frozenset())
    c = RuleRHS(2, frozenset({0}), frozenset({(0, 1)}))
    g.add(START, a, 3.0)
    g.add(Nonterminal(1), b, 1.0)
    g.add(Nonterminal(1), c, 3.0)
    return g, a, b, c


class TestTables:
    def test_normalize(self):
        g, a, b, c = _toy_counts()
        p = normalize(g)
        assert p.probability(START, a) == 1.0
        assert p.probability(Nonterminal(1), b) == pytest.approx(0.25)
        assert p.probability(Nonterminal(1), c) == pytest.approx(0.75)
        assert p.size() == 3

    def test_zero_total(self):
        g, a, _, _ = _toy_counts()
        g.rules[START][a] = 0.0
        with pytest.raises(NormalizationError):
            normalize(g)

    def test_negative(self):
        g, _, b, _ = _toy_counts()
        g.rules[Nonterminal(1)][b] = -1.0
        with pytest.raises(NormalizationError):
            normalize(g)

    def test_merge_sums_counts_first(self):
        g1, a, b, c = _toy_counts()
        g2 = Grammar()
        g2.add(Nonterminal(1), b, 4.0)
        merged = merge_grammars([g1, g2])
        assert merged.probability(Nonterminal(1), b) == pytest.approx(5 / 8)
        assert sum_counts([g1, g2]).probability(Nonterminal(1), b) == 5.0

    def test_merge_split_mismatch(self):
        with pytest.raises(ValueError):
            sum_counts([Grammar(1), Grammar(2)])

    def test_sum_to_one_on_samples(self):
        ba = generate_barabasi_albert(400, 2, 3)
        grams = []
        for seed in range(10):
            s = sample_subgraph(ba, 25, seed)
            grams.append(extract_grammar(s, binarize(decompose(s))))
        merged = merge_grammars(grams)
        for table in merged.rules.values():
            assert sum(table.values()) == pytest.approx(1.0, abs=1e-12)


class TestTextFormat:
    def test_roundtrip_exact(self):
        ba = generate_barabasi_albert(400, 2, 5)
        grams = [extract_grammar(s, binarize(decompose(s)))
                 for s in (sample_subgraph(ba, 25, k) for k in range(5))]
        g = merge_grammars(grams)
        again = parse_grammar(serialize(g))
        assert again.rules == g.rules
        assert serialize(again) == serialize(g)

    def test_split_count_inferred(self):
        line = "N^1_2 -> nodes=2 ext=0 T=0-1 NT=1_3:(1) w=0.5"
        g = parse_grammar(line + "\n")
        assert g.split_count == 3
        r = parse_rule(line)
        assert r.lhs == Nonterminal(1, 2)
        assert r.rhs.nonterminal_edges == ((Nonterminal(1, 3), (1,)),)

    def test_bad_line(self):
        with pytest.raises(GrammarFormatError):
            parse_rule("N^1_1 => nonsense")

    def test_dump_filters_and_orders(self):
        g, a, b, c = _toy_counts()
        p = normalize(g)
        lines = dump_grammar(p).splitlines()
        assert lines[0].startswith("N^0_1")
        assert "w=0.75" in lines[1] and "w=0.25" in lines[2]
        assert len(dump_grammar(p, min_probability=0.5).splitlines()) == 2
        assert len(dump_grammar(p, max_externals=0).splitlines()) == 1

    def test_dump_empty_and_full(self):
        assert dump_grammar(Grammar()) == ""
        g, *_ = _toy_counts()
        p = normalize(g)
        assert len(dump_grammar(p).splitlines()) == p.size()
