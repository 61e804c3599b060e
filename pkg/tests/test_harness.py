import json

import pytest

from hrgkit.cli import main
from hrgkit.grammar import parse_grammar
from hrgkit.graphcore import generate_barabasi_albert, load_edge_list
from hrgkit.harness import (
    ExperimentConfig,
    build_corpus,
    effective_epsilon,
    partition_nodes,
    resolve_source,
    run_experiment,
    sample_many,
)
from hrgkit.inference import smallest_probability
from hrgkit.latent import EmConfig

SMALL = dict(train_source="ba:400:2:1", test_source="ba:400:2:2", num_train_samples=20,
             num_test_samples=3, sample_size=12, em=EmConfig(max_iterations=5, min_iterations=2))


class TestHarness:
    def test_resolve_specs(self, tmp_path):
        assert resolve_source("ba:50:2:1").number_of_edges() == 96
        assert resolve_source("ws:20:4:0.0:1").number_of_edges() == 40
        p = tmp_path / "g.txt"
        p.write_text("0 1\n1 2\n")
        assert resolve_source(str(p)).number_of_edges() == 2

    def test_partition(self):
        g = generate_barabasi_albert(101, 2, 0)
        a, b = partition_nodes(g, 3)
        assert a | b == g.nodes and not a & b
        assert abs(len(a) - len(b)) <= 1

    def test_sample_many_seeded(self):
        g = generate_barabasi_albert(200, 2, 0)
        assert sample_many(g, 3, 10, 5) == sample_many(g, 3, 10, 5)

    def test_effective_epsilon(self):
        corpus = build_corpus(sample_many(generate_barabasi_albert(200, 2, 0), 10, 12, 1))
        eps = effective_epsilon(corpus.grammar, 0.5)
        assert eps == pytest.approx(0.1 * smallest_probability(corpus.grammar))
        assert effective_epsilon(corpus.grammar, 1e-30) == 1e-30

    @pytest.mark.parametrize("mode", ["cross-graph", "disjoint-partition"])
    def test_run_is_deterministic(self, mode):
        cfg = ExperimentConfig(splits=2, mode=mode, seed=4, **SMALL)
        a, b = run_experiment(cfg), run_experiment(cfg)
        assert a.scores_jsonl() == b.scores_jsonl()
        assert a.trace == b.trace
        assert len(a.scores) == 3
        assert not a.smoothing_failure
        assert a.grammar.split_count == 2

    def test_write(self, tmp_path):
        report = run_experiment(ExperimentConfig(**SMALL))
        report.write(tmp_path)
        lines = (tmp_path / "scores.jsonl").read_text().splitlines()
        assert json.loads(lines[-1])["grammar_size"] == report.grammar_size
        assert parse_grammar((tmp_path / "grammar.txt").read_text()).size() == report.grammar_size
        assert (tmp_path / "trace.tsv").read_text().count("\n") == len(report.trace)
        assert "train" in (tmp_path / "timings.tsv").read_text()

    @pytest.mark.parametrize("bad", [dict(splits=0), dict(sample_size=1), dict(mode="other")])
    def test_bad_config(self, bad):
        with pytest.raises(ValueError):
            ExperimentConfig(**bad)


class TestCli:
    def test_pipeline(self, tmp_path, capsys):
        main(["gen", "ba", "--nodes", "300", "--seed", "2", "--out", str(tmp_path)])
        ba = tmp_path / "ba.txt"
        with open(ba) as fh:
            assert load_edge_list(fh).number_of_edges() == 596
        samples = tmp_path / "samples"
        main(["sample", str(ba), "--size", "12", "--count", "6", "--out", str(samples)])
        files = sorted(str(p) for p in samples.iterdir())
        assert len(files) == 6
        main(["decompose", files[0], "--binarize"])
        assert "parent=none" in capsys.readouterr().out
        model = tmp_path / "model"
        main(["train", *files[:4], "--splits", "2", "--max-iterations", "3", "--min-iterations", "2",
              "--out", str(model)])
        grammar = model / "grammar.txt"
        assert parse_grammar(grammar.read_text()).split_count == 2
        main(["score", str(grammar), *files[4:], "--epsilon", "1e-12"])
        out = capsys.readouterr().out.splitlines()
        assert len(out) == 3 and "mean" in json.loads(out[-1])
        main(["generate", str(grammar), "--count", "2", "--out", str(tmp_path / "gen")])
        assert len(list((tmp_path / "gen").iterdir())) == 2
        main(["dump-grammar", str(grammar), "--max-externals", "1"])
        assert all("N^0" in l or "N^1" in l for l in capsys.readouterr().out.splitlines())
        main(["metrics", files[0], files[1]])
        names = [l.split("\t")[0] for l in capsys.readouterr().out.splitlines()]
        assert names == ["degree_distance", "gcd"]

    def test_extract(self, tmp_path, capsys):
        g = tmp_path / "g.txt"
        g.write_text("0 1\n1 2\n2 0\n2 3\n")
        main(["extract", str(g)])
        lines = capsys.readouterr().out.splitlines()
        assert lines and all(l.endswith("w=1.0") for l in lines)

    def test_config_defaults_and_override(self, tmp_path):
        cfg = tmp_path / "gen.cfg"
        cfg.write_text("# ring lattice\nnodes = 20\nrewire = 0.0\n")
        main(["gen", "ws", "--config", str(cfg), "--out", str(tmp_path / "a")])
        with open(tmp_path / "a" / "ws.txt") as fh:
            assert load_edge_list(fh).number_of_edges() == 40
        main(["gen", "ws", "--config", str(cfg), "--nodes", "30", "--out", str(tmp_path / "b")])
        with open(tmp_path / "b" / "ws.txt") as fh:
            assert load_edge_list(fh).number_of_nodes() == 30

    def test_config_unknown_key(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("colour = red\n")
        with pytest.raises(SystemExit):
            main(["gen", "ba", "--config", str(cfg)])

    def test_experiment(self, tmp_path):
        main(["experiment", "--train", "ba:300:2:1", "--test", "ws:300:4:0.2:1", "--train-samples", "10",
              "--test-samples", "2", "--sample-size", "10", "--max-iterations", "2", "--out", str(tmp_path)])
        assert (tmp_path / "scores.jsonl").read_text().count("\n") == 3
