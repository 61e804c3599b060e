"""Command-line entry point: ``hrgkit <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import grammar as gm
from .graphcore import (
    generate_barabasi_albert,
    generate_chung_lu,
    generate_watts_strogatz,
    load_edge_list,
    write_edge_list,
)
from .harness import ExperimentConfig, build_corpus, effective_epsilon, run_experiment, sample_many, train_model
from .inference import GenerationLimits, evaluate_testset, generate_graph, generate_sized, score_graph
from .latent import EmConfig, format_trace
from .metrics import degree_distance, gcd
from .treedecomp import binarize, decompose


def _read_graph(path: str):
    with open(path, encoding="utf-8") as fh:
        return load_edge_list(fh)


def _read_grammar(path: str) -> gm.Grammar:
    return gm.parse_grammar(Path(path).read_text(encoding="utf-8"))


def _emit(text: str, out: str | None, name: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    target = Path(out)
    target.mkdir(parents=True, exist_ok=True)
    (target / name).write_text(text, encoding="utf-8")


def _graph_text(g) -> str:
    import io

    buf = io.StringIO()
    write_edge_list(g, buf)
    return buf.getvalue()


def read_config_file(path: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SystemExit(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _em_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--splits", type=int, default=1)
    p.add_argument("--max-iterations", type=int, default=50)
    p.add_argument("--rel-tolerance", type=float, default=1e-4)
    p.add_argument("--min-iterations", type=int, default=20)
    p.add_argument("--jitter", type=float, default=0.01)


def _em_config(a) -> EmConfig:
    return EmConfig(max_iterations=a.max_iterations, rel_tolerance=a.rel_tolerance,
                    min_iterations=min(a.min_iterations, a.max_iterations), seed=a.seed)


def cmd_gen(a) -> None:
    if a.model == "ba":
        g = generate_barabasi_albert(a.nodes, a.attach, a.seed)
    elif a.model == "ws":
        g = generate_watts_strogatz(a.nodes, a.ring_degree, a.rewire, a.seed)
    else:
        if not a.target:
            raise SystemExit("--target is required for the Chung-Lu model")
        g = generate_chung_lu(_read_graph(a.target), a.seed)
    _emit(_graph_text(g), a.out, f"{a.model}.txt")


def cmd_sample(a) -> None:
    samples = sample_many(_read_graph(a.graph), a.count, a.size, a.seed)
    for i, g in enumerate(samples):
        _emit(_graph_text(g), a.out, f"sample_{i:04d}.txt")


def cmd_decompose(a) -> None:
    td = decompose(_read_graph(a.graph))
    if a.binarize:
        td = binarize(td)
    _emit(td.dump(), a.out, "decomposition.txt")


def cmd_extract(a) -> None:
    corpus = build_corpus([_read_graph(p) for p in a.graphs])
    _emit(gm.serialize(corpus.grammar), a.out, "grammar.txt")


def cmd_train(a) -> None:
    corpus = build_corpus([_read_graph(p) for p in a.graphs])
    grammar, trace = train_model(corpus, a.splits, _em_config(a), a.jitter, a.seed)
    _emit(gm.serialize(grammar), a.out, "grammar.txt")
    if a.out:
        _emit(format_trace(trace), a.out, "trace.tsv")


def cmd_score(a) -> None:
    grammar = _read_grammar(a.grammar)
    eps = effective_epsilon(grammar, a.epsilon)
    graphs = [_read_graph(p) for p in a.graphs]
    lines = []
    if len(graphs) >= 2:
        summary = evaluate_testset(grammar, graphs, eps)
        lines = [r.to_json() for r in summary.reports]
        lines.append(f'{{"mean": {summary.mean!r}, "ci95": {summary.ci95!r}}}')
    else:
        lines = [score_graph(grammar, g, eps).to_json() for g in graphs]
    _emit("\n".join(lines) + "\n", a.out, "scores.jsonl")


def cmd_generate(a) -> None:
    grammar = _read_grammar(a.grammar)
    limits = GenerationLimits(a.max_expansions, a.max_nodes, a.max_retries)
    for i in range(a.count):
        seed = a.seed + i
        if a.target_nodes:
            g = generate_sized(grammar, a.target_nodes, a.tolerance, limits, seed)
        else:
            g = generate_graph(grammar, limits, seed)
        _emit(_graph_text(g), a.out, f"generated_{i:04d}.txt")


def cmd_metrics(a) -> None:
    g1, g2 = _read_graph(a.first), _read_graph(a.second)
    rows = [("degree_distance", degree_distance(g1, g2)), ("gcd", gcd(g1, g2))]
    _emit("".join(f"{name}\t{value!r}\n" for name, value in rows), a.out, "metrics.tsv")


def cmd_experiment(a) -> None:
    cfg = ExperimentConfig(
        train_source=a.train, test_source=a.test,
        num_train_samples=a.train_samples, num_test_samples=a.test_samples,
        sample_size=a.sample_size, splits=a.splits, epsilon=a.epsilon,
        em=_em_config(a), jitter=a.jitter, seed=a.seed, mode=a.mode,
    )
    report = run_experiment(cfg)
    if a.out:
        report.write(Path(a.out))
    else:
        sys.stdout.write(report.scores_jsonl())


def cmd_dump_grammar(a) -> None:
    text = gm.dump_grammar(_read_grammar(a.grammar), a.min_probability, a.max_externals)
    _emit(text, a.out, "grammar_dump.txt")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hrgkit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="output directory (default: stdout)")
        p.add_argument("--config", default=None, help="key=value file supplying option defaults")
        p.set_defaults(func=func)
        return p

    p = add("gen", cmd_gen, "generate a synthetic graph")
    p.add_argument("model", choices=["ba", "ws", "cl"])
    p.add_argument("--nodes", type=int, default=3000)
    p.add_argument("--attach", type=int, default=2)
    p.add_argument("--ring-degree", type=int, default=4)
    p.add_argument("--rewire", type=float, default=0.2)
    p.add_argument("--target", help="edge list whose degrees drive the Chung-Lu model")

    p = add("sample", cmd_sample, "random-walk subgraph samples")
    p.add_argument("graph")
    p.add_argument("--size", type=int, default=25)
    p.add_argument("--count", type=int, default=1)

    p = add("decompose", cmd_decompose, "tree decomposition dump")
    p.add_argument("graph")
    p.add_argument("--binarize", action="store_true")

    p = add("extract", cmd_extract, "extract a merged, normalized grammar")
    p.add_argument("graphs", nargs="+")

    p = add("train", cmd_train, "extract, split and EM-train a grammar")
    p.add_argument("graphs", nargs="+")
    _em_args(p)

    p = add("score", cmd_score, "smoothed log-likelihood of test graphs")
    p.add_argument("grammar")
    p.add_argument("graphs", nargs="+")
    p.add_argument("--epsilon", type=float, default=1e-10)

    p = add("generate", cmd_generate, "sample graphs from a grammar")
    p.add_argument("grammar")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--target-nodes", type=int, default=0)
    p.add_argument("--tolerance", type=int, default=0)
    p.add_argument("--max-expansions", type=int, default=10_000)
    p.add_argument("--max-nodes", type=int, default=10_000)
    p.add_argument("--max-retries", type=int, default=100)

    p = add("metrics", cmd_metrics, "degree distance and GCD between two graphs")
    p.add_argument("first")
    p.add_argument("second")

    p = add("experiment", cmd_experiment, "full train/test protocol")
    p.add_argument("--train", default="ba:3000:2:1")
    p.add_argument("--test", default="ba:3000:2:2")
    p.add_argument("--train-samples", type=int, default=500)
    p.add_argument("--test-samples", type=int, default=4)
    p.add_argument("--sample-size", type=int, default=25)
    p.add_argument("--epsilon", type=float, default=1e-10)
    p.add_argument("--mode", choices=["cross-graph", "disjoint-partition"], default="cross-graph")
    _em_args(p)

    p = add("dump-grammar", cmd_dump_grammar, "filtered, sorted grammar listing")
    p.add_argument("grammar")
    p.add_argument("--min-probability", type=float, default=0.0)
    p.add_argument("--max-externals", type=float, default=float("inf"))
    return parser


def _coerce(parser: argparse.ArgumentParser, command: str, values: dict[str, str]) -> dict:
    """Convert config-file strings using the subcommand's declared types."""
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[command]
    out = {}
    for action in sub._actions:
        if action.dest in values:
            raw = values[action.dest]
            if isinstance(action, argparse._StoreTrueAction):
                out[action.dest] = raw.lower() in ("1", "true", "yes", "on")
            else:
                out[action.dest] = action.type(raw) if action.type else raw
    unknown = set(values) - set(out)
    if unknown:
        raise SystemExit(f"unknown config keys for {command}: {', '.join(sorted(unknown))}")
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        # config supplies defaults; flags given on the command line still win
        defaults = _coerce(parser, args.command, read_config_file(args.config))
        sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[args.command]
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.func(args)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
