"""Probabilistic hyperedge replacement grammars with latent subsymbols."""

from .graphcore import Graph, load_edge_list, write_edge_list
from .grammar import Grammar, Nonterminal, Rule, RuleRHS, extract_grammar, normalize
from .treedecomp import TreeDecomposition, binarize, decompose, validate

__version__ = "0.1.0"

__all__ = [
    "Grammar",
    "Graph",
    "Nonterminal",
    "Rule",
    "RuleRHS",
    "TreeDecomposition",
    "binarize",
    "decompose",
    "extract_grammar",
    "load_edge_list",
    "normalize",
    "validate",
    "write_edge_list",
]
