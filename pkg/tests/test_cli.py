from __future__ import annotations

import json

import numpy as np
import pytest

from senserank.cli import main
from senserank.corpus import build_splits, FilterConfig, load_interchange
from senserank.store import build_store

from .conftest import corpus_record, write_corpus
from .synth import PlantedSpec, build_planted_corpus, cluster_vectors
from senserank.corpus import save_interchange


def run_cli(*argv: str) -> int:
    return main(list(argv))


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    """A small planted corpus with both stores built, ready to evaluate."""
    root = tmp_path_factory.mktemp("smallrun")
    spec = PlantedSpec(
        n_low_lemmas=2,
        n_high_lemmas=2,
        low_sense_counts=(12, 6),
        high_sense_counts=(40, 12),
        queries_per_sense=2,
        dim=8,
    )
    instances = build_planted_corpus(spec)
    corpus_path = root / "corpus.jsonl"
    save_interchange(instances, corpus_path)
    vectors = cluster_vectors(instances, spec, seed=7)
    split = build_splits(instances, FilterConfig())
    build_store(
        ((i.instance_id, i.lemma, vectors[i.instance_id]) for i in split.d),
        spec.dim,
        root / "d.store",
    )
    build_store(
        ((i.instance_id, i.lemma, vectors[i.instance_id]) for i in split.q),
        spec.dim,
        root / "q.store",
    )
    return root, corpus_path, split


def eval_args(root, corpus_path, out, *extra):
    return (
        "evaluate",
        "--corpus", str(corpus_path),
        "--store-d", str(root / "d.store"),
        "--store-q", str(root / "q.store"),
        "--l-threshold", "30",
        "--out", str(out),
        "--model-label", "toy",
        *extra,
    )


class TestIngest:
    def test_counts_written(self, tmp_path):
        records = [corpus_record(f"d{i}", sense="pull.1") for i in range(10)]
        records += [
            corpus_record(f"q{i}", sense="pull.1", split="test") for i in range(5)
        ]
        corpus = write_corpus(tmp_path / "c.jsonl", records)
        out = tmp_path / "out"
        assert run_cli("ingest", "--corpus", str(corpus), "--out", str(out)) == 0
        stats = json.loads((out / "ingest_stats.json").read_text())
        assert stats["d_count"] == 10 and stats["q_count"] == 5
        assert stats["discarded_count"] == 0
        assert len(load_interchange(out / "d.jsonl")) == 10
        assert len(load_interchange(out / "q.jsonl")) == 5

    def test_empty_d_exit_code_1(self, tmp_path, capsys):
        corpus = write_corpus(
            tmp_path / "c.jsonl", [corpus_record("q0", split="test")]
        )
        code = run_cli("ingest", "--corpus", str(corpus), "--out", str(tmp_path / "o"))
        assert code == 1
        assert "empty D" in capsys.readouterr().err

    def test_malformed_corpus_exit_code_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("{broken\n")
        code = run_cli("ingest", "--corpus", str(bad), "--out", str(tmp_path / "o"))
        assert code == 2
        assert "line 1" in capsys.readouterr().err

    def test_discard_pattern_flag(self, tmp_path):
        records = [corpus_record(f"d{i}", sense="pull.1") for i in range(6)]
        records += [corpus_record(f"n{i}", sense="pull.nota") for i in range(6)]
        corpus = write_corpus(tmp_path / "c.jsonl", records)
        out = tmp_path / "out"
        assert (
            run_cli(
                "ingest", "--corpus", str(corpus), "--out", str(out),
                "--discard-sense", "*.nota",
            )
            == 0
        )
        stats = json.loads((out / "ingest_stats.json").read_text())
        assert stats["d_count"] == 6

    def test_bucket_counts_reported(self, tmp_path):
        records = [corpus_record(f"d{i}", sense="pull.1") for i in range(8)]
        records += [corpus_record("q0", sense="pull.1", split="dev")]
        corpus = write_corpus(tmp_path / "c.jsonl", records)
        out = tmp_path / "out"
        run_cli("ingest", "--corpus", str(corpus), "--out", str(out))
        stats = json.loads((out / "ingest_stats.json").read_text())
        assert stats["bucket_query_counts"]["low_common"] == 1


class TestEvaluate:
    def test_end_to_end_artifacts(self, small_run, tmp_path):
        root, corpus_path, split = small_run
        out = tmp_path / "out"
        assert run_cli(*eval_args(root, corpus_path, out)) == 0
        for name in ("evaluations.csv", "summary.csv", "curves.csv", "table.txt",
                     "manifest.json"):
            assert (out / name).exists()
        for band in ("low_rare", "low_common", "high_rare", "high_common"):
            assert (out / "buckets" / f"bucket_{band}.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["evaluated_queries"] == len(split.q)
        assert manifest["skipped_queries"] == []
        assert manifest["tool_version"]
        assert set(manifest["store_checksums"]) == {"d", "d_index", "q", "q_index"}
        header = (out / "evaluations.csv").read_text().splitlines()[0]
        assert header.startswith("query_id,lemma,sense,lemma_freq,sense_ratio")

    def test_rerun_byte_identical(self, small_run, tmp_path):
        root, corpus_path, _ = small_run
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert run_cli(*eval_args(root, corpus_path, out1)) == 0
        assert run_cli(*eval_args(root, corpus_path, out2)) == 0
        for name in ("evaluations.csv", "summary.csv", "curves.csv", "table.txt"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_worker_count_does_not_change_output(self, small_run, tmp_path):
        root, corpus_path, _ = small_run
        out1, out2 = tmp_path / "w1", tmp_path / "w8"
        assert run_cli(*eval_args(root, corpus_path, out1, "--workers", "1")) == 0
        assert run_cli(*eval_args(root, corpus_path, out2, "--workers", "8")) == 0
        for name in ("evaluations.csv", "summary.csv", "curves.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_missing_query_embedding_is_hard_error(self, small_run, tmp_path, capsys):
        root, corpus_path, split = small_run
        partial = tmp_path / "partial.store"
        spec_dim = 8
        vectors = cluster_vectors(split.q, PlantedSpec(dim=spec_dim), seed=9)
        dropped = split.q[0].instance_id
        build_store(
            (
                (i.instance_id, i.lemma, vectors[i.instance_id])
                for i in split.q
                if i.instance_id != dropped
            ),
            spec_dim,
            partial,
        )
        code = run_cli(
            "evaluate",
            "--corpus", str(corpus_path),
            "--store-d", str(root / "d.store"),
            "--store-q", str(partial),
            "--out", str(tmp_path / "o"),
        )
        assert code == 2
        assert dropped in capsys.readouterr().err

    def test_top_k_below_depth_rejected(self, small_run, tmp_path, capsys):
        root, corpus_path, _ = small_run
        code = run_cli(*eval_args(root, corpus_path, tmp_path / "o", "--top-k", "10"))
        assert code == 1
        assert "50" in capsys.readouterr().err

    def test_monte_carlo_baseline_mode(self, small_run, tmp_path):
        root, corpus_path, _ = small_run
        out = tmp_path / "mc"
        assert (
            run_cli(
                *eval_args(
                    root, corpus_path, out,
                    "--baseline-mode", "monte-carlo",
                    "--mc-trials", "2000", "--seed", "11",
                )
            )
            == 0
        )
        rows = (out / "evaluations.csv").read_text().splitlines()[1:]
        header = (out / "evaluations.csv").read_text().splitlines()[0].split(",")
        b_idx, g_idx, n_idx = (
            header.index("baseline_ap_50"),
            header.index("gold_count"),
            header.index("n_candidates"),
        )
        for row in rows[:10]:
            cells = row.split(",")
            estimate = float(cells[b_idx])
            exact = int(cells[g_idx]) / int(cells[n_idx])
            assert abs(estimate - exact) < 0.05

    def test_config_file_with_flag_override(self, small_run, tmp_path):
        root, corpus_path, _ = small_run
        config = {
            "corpus_path": str(corpus_path),
            "store_path_d": str(root / "d.store"),
            "store_path_q": str(root / "q.store"),
            "lemma_threshold": 30,
            "model_label": "from-config",
            "out_dir": str(tmp_path / "cfg-out"),
        }
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps(config))
        assert run_cli("evaluate", "--config", str(cfg)) == 0
        table = (tmp_path / "cfg-out" / "table.txt").read_text()
        assert "from-config" in table
        assert (
            run_cli(
                "evaluate", "--config", str(cfg),
                "--model-label", "flag-wins",
                "--out", str(tmp_path / "cfg-out2"),
            )
            == 0
        )
        table2 = (tmp_path / "cfg-out2" / "table.txt").read_text()
        assert "flag-wins" in table2 and "from-config" not in table2

    def test_unknown_config_key_rejected(self, small_run, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text('{"no_such_key": 1}')
        assert run_cli("evaluate", "--config", str(cfg)) == 1
        assert "no_such_key" in capsys.readouterr().err


class TestQuery:
    def test_listing_marks_gold(self, small_run, capsys):
        root, corpus_path, split = small_run
        qid = split.q[0].instance_id
        code = run_cli(
            "query",
            "--corpus", str(corpus_path),
            "--store-d", str(root / "d.store"),
            "--store-q", str(root / "q.store"),
            "--id", qid,
        )
        assert code == 0
        out = capsys.readouterr().out
        assert f"query {qid}" in out
        assert "**" in out  # target marked in context
        ranked = [line for line in out.splitlines() if line.lstrip()[:1].isdigit()]
        assert ranked, "no ranked result lines printed"
        assert any(" * " in line for line in ranked)  # gold results starred
        assert all("[" in line for line in ranked)  # sense label shown per result

    def test_top_k_one(self, small_run, capsys):
        root, corpus_path, split = small_run
        qid = split.q[0].instance_id
        code = run_cli(
            "query",
            "--corpus", str(corpus_path),
            "--store-d", str(root / "d.store"),
            "--store-q", str(root / "q.store"),
            "--id", qid,
            "--top-k", "1",
        )
        assert code == 0
        out = capsys.readouterr().out
        ranked = [l for l in out.splitlines() if l.strip().startswith("1 ")]
        assert len(ranked) == 1

    def test_unknown_id_nonzero_exit(self, small_run, capsys):
        root, corpus_path, _ = small_run
        code = run_cli(
            "query",
            "--corpus", str(corpus_path),
            "--store-d", str(root / "d.store"),
            "--store-q", str(root / "q.store"),
            "--id", "missing-id",
        )
        assert code == 2
        assert "missing-id" in capsys.readouterr().err


class TestReport:
    def test_table_matches_evaluate(self, small_run, tmp_path, capsys):
        root, corpus_path, _ = small_run
        out = tmp_path / "out"
        assert run_cli(*eval_args(root, corpus_path, out)) == 0
        capsys.readouterr()
        code = run_cli(
            "report",
            "--evaluations", str(out / "evaluations.csv"),
            "--format", "table",
            "--l-threshold", "30",
            "--model-label", "toy",
        )
        assert code == 0
        printed = capsys.readouterr().out
        saved = (out / "table.txt").read_text()
        # same cells; the re-rendered table lacks the corpus label line
        assert printed.splitlines()[1:] == saved.splitlines()[1:]

    def test_curves_round_trip(self, small_run, tmp_path):
        root, corpus_path, _ = small_run
        out = tmp_path / "out"
        run_cli(*eval_args(root, corpus_path, out))
        rep = tmp_path / "rep"
        code = run_cli(
            "report",
            "--evaluations", str(out / "evaluations.csv"),
            "--format", "curves",
            "--l-threshold", "30",
            "--out", str(rep),
        )
        assert code == 0
        assert (rep / "curves.csv").read_bytes() == (out / "curves.csv").read_bytes()

    def test_threshold_override_rebuckets(self, small_run, tmp_path, capsys):
        root, corpus_path, split = small_run
        out = tmp_path / "out"
        run_cli(*eval_args(root, corpus_path, out))
        capsys.readouterr()
        code = run_cli(
            "report",
            "--evaluations", str(out / "evaluations.csv"),
            "--format", "table",
            "--l-threshold", "100000",
        )
        assert code == 0
        table = capsys.readouterr().out
        lines = table.splitlines()
        queries_row = next(l for l in lines if l.startswith("queries"))
        counts = queries_row.split()[1:]
        assert counts[2] == "0" and counts[3] == "0"  # nothing is high-band now

    def test_missing_evaluations_file(self, tmp_path, capsys):
        code = run_cli(
            "report", "--evaluations", str(tmp_path / "nope.csv"), "--format", "table"
        )
        assert code == 2


class TestUsage:
    def test_unknown_flag_exit_1(self, capsys):
        assert run_cli("evaluate", "--bogus") == 1

    def test_missing_required_inputs(self, capsys):
        assert run_cli("evaluate") == 1
        assert "corpus" in capsys.readouterr().err

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run_cli("--version")
        assert exc.value.code == 0
        assert "senserank" in capsys.readouterr().out
