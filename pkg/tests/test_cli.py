"""Command-line behavior: exit codes, determinism, config strictness."""
from __future__ import annotations

import json
from pathlib import Path

import pytest

from leanrag.cli import EXIT_CONFIG, EXIT_OK, EXIT_QUESTION_FAILURES, load_config, main
from leanrag.clients import Cassette, ChatClient, chat
from leanrag.domain import read_corpus
from leanrag.vindex import load_index

from .conftest import FIXTURES, scripted_transport

E2E = FIXTURES / "e2e"


def write_math_fixture(directory: Path, count: int = 3) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        (directory / f"q{i}.json").write_text(
            json.dumps(
                {"problem": f"Compute {i} + {i}.", "solution": f"The answer is {2 * i}.", "type": "Arithmetic"}
            ),
            encoding="utf-8",
        )


@pytest.fixture
def meta():
    return json.loads((E2E / "expected_report.json").read_text())["meta"]


def build_fixture_indexes(tmp_path: Path, meta) -> tuple[Path, Path]:
    nl_index = tmp_path / "nl.idx"
    fl_index = tmp_path / "fl.idx"
    for mode, corpus, out in (
        ("nl", E2E / "corpus_nl.jsonl", nl_index),
        ("fl", E2E / "corpus_fl.jsonl", fl_index),
    ):
        code = main(
            [
                "build",
                "--corpus",
                str(corpus),
                "--mode",
                mode,
                "--provider",
                "local",
                "--dim",
                str(meta["local_dim"]),
                "--out",
                str(out),
            ]
        )
        assert code == EXIT_OK
    return nl_index, fl_index


def eval_args(tmp_path: Path, out_dir: Path, meta, nl_index: Path, fl_index: Path) -> list[str]:
    config = {
        "paths": {
            "corpus": str(E2E / "corpus_nl.jsonl"),
            "fl_corpus": str(E2E / "corpus_fl.jsonl"),
            "nl_index": str(nl_index),
            "fl_index": str(fl_index),
            "chat_cassette": str(E2E / "cassettes" / "chat.json"),
            "translation_cassette": str(E2E / "cassettes" / "translate.json"),
            "benchmark_dir": str(E2E / "benchmark"),
        },
        "provider": {
            "generation_model": meta["generation_model"],
            "translation_model": meta["translation_model"],
        },
        "pipeline": {
            "client_mode": "replay",
            "local_dim": meta["local_dim"],
            "top_k": meta["top_k"],
        },
    }
    config_path = tmp_path / f"config_{out_dir.name}.json"
    config_path.write_text(json.dumps(config), encoding="utf-8")
    return [
        "--config",
        str(config_path),
        "eval",
        "--per-category",
        str(meta["per_category"]),
        "--out-dir",
        str(out_dir),
        "--trace",
        str(out_dir / "trace.jsonl"),
    ]


class TestIngest:
    def test_writes_corpus_and_reports_counts(self, tmp_path, capsys):
        math_dir = tmp_path / "math"
        write_math_fixture(math_dir)
        out = tmp_path / "corpus.jsonl"
        assert main(["ingest", "--math-dir", str(math_dir), "--out", str(out)]) == EXIT_OK
        assert "ingested 3 documents, skipped 0" in capsys.readouterr().out
        assert len(read_corpus(out)) == 3

    def test_missing_directory_exits_2(self, tmp_path, capsys):
        code = main(
            ["ingest", "--math-dir", str(tmp_path / "nope"), "--out", str(tmp_path / "c.jsonl")]
        )
        assert code == EXIT_CONFIG
        assert "error" in capsys.readouterr().err

    def test_rerun_is_byte_identical(self, tmp_path):
        math_dir = tmp_path / "math"
        write_math_fixture(math_dir, count=5)
        first = tmp_path / "first.jsonl"
        second = tmp_path / "second.jsonl"
        main(["ingest", "--math-dir", str(math_dir), "--out", str(first)])
        main(["ingest", "--math-dir", str(math_dir), "--out", str(second)])
        assert first.read_bytes() == second.read_bytes()


class TestBuild:
    def test_builds_loadable_index(self, tmp_path, meta):
        out = tmp_path / "nl.idx"
        code = main(
            [
                "build",
                "--corpus",
                str(E2E / "corpus_nl.jsonl"),
                "--mode",
                "nl",
                "--provider",
                "local",
                "--out",
                str(out),
            ]
        )
        assert code == EXIT_OK
        index = load_index(out)
        # Counting oracle: index entries equal corpus lines (none skipped).
        corpus_lines = (E2E / "corpus_nl.jsonl").read_text().count("\n")
        assert len(index) == corpus_lines == 12

    def test_fl_mode_without_fl_text_names_offender(self, tmp_path, capsys):
        code = main(
            [
                "build",
                "--corpus",
                str(E2E / "corpus_nl.jsonl"),
                "--mode",
                "fl",
                "--provider",
                "local",
                "--out",
                str(tmp_path / "fl.idx"),
            ]
        )
        assert code == EXIT_CONFIG
        assert "math_dataset:000000" in capsys.readouterr().err

    def test_rebuild_is_byte_identical(self, tmp_path):
        first = tmp_path / "a.idx"
        second = tmp_path / "b.idx"
        for out in (first, second):
            main(
                [
                    "build",
                    "--corpus",
                    str(E2E / "corpus_nl.jsonl"),
                    "--mode",
                    "nl",
                    "--provider",
                    "local",
                    "--out",
                    str(out),
                ]
            )
        assert first.read_bytes() == second.read_bytes()


def write_provider_config(tmp_path: Path, meta) -> Path:
    config_path = tmp_path / "provider_config.json"
    config_path.write_text(
        json.dumps(
            {
                "provider": {
                    "generation_model": meta["generation_model"],
                    "translation_model": meta["translation_model"],
                },
                "pipeline": {"local_dim": meta["local_dim"], "top_k": meta["top_k"]},
            }
        ),
        encoding="utf-8",
    )
    return config_path


class TestQuery:
    BASE_QUESTION = "In base 10, what is $-15 - -839090$?"

    def record_query_cassettes(self, tmp_path: Path, meta, nl_index: Path) -> Path:
        """Record a one-question cassette, then the test replays it."""
        cassette_path = tmp_path / "query_chat.json"
        client = ChatClient(
            mode="record",
            cassette=Cassette(cassette_path),
            transport=scripted_transport(
                {self.BASE_QUESTION: "Therefore, the final answer is {839075}."}
            ),
        )
        documents = read_corpus(E2E / "corpus_nl.jsonl")
        from leanrag.domain import BenchmarkQuestion, PipelineConfig
        from leanrag.embedding import LocalEmbedder
        from leanrag.pipeline import IndexedCorpus, PipelineClients, run_nl_pipeline

        corpus = IndexedCorpus(
            index=load_index(nl_index), documents={d.doc_id: d for d in documents}
        )
        run_nl_pipeline(
            BenchmarkQuestion("adhoc#0001", "adhoc", self.BASE_QUESTION, "n/a"),
            corpus,
            PipelineConfig(
                mode="nl",
                generation_model=meta["generation_model"],
                client_mode="record",
                top_k=meta["top_k"],
            ),
            PipelineClients(embedder=LocalEmbedder(dim=meta["local_dim"]), chat=client),
        )
        return cassette_path

    def query_args(self, tmp_path, meta, nl_index, cassette_path) -> list[str]:
        return [
            "--config",
            str(write_provider_config(tmp_path, meta)),
            "query",
            "--mode",
            "nl",
            "--q",
            self.BASE_QUESTION,
            "--corpus",
            str(E2E / "corpus_nl.jsonl"),
            "--nl-index",
            str(nl_index),
            "--chat-cassette",
            str(cassette_path),
        ]

    def test_replay_prints_recorded_generation(self, tmp_path, meta, capsys):
        nl_index, _ = build_fixture_indexes(tmp_path, meta)
        cassette_path = self.record_query_cassettes(tmp_path, meta, nl_index)
        capsys.readouterr()
        code = main(self.query_args(tmp_path, meta, nl_index, cassette_path))
        assert code == EXIT_OK
        assert "Therefore, the final answer is {839075}." in capsys.readouterr().out

    def test_identical_stdout_across_reruns(self, tmp_path, meta, capsys):
        nl_index, _ = build_fixture_indexes(tmp_path, meta)
        cassette_path = self.record_query_cassettes(tmp_path, meta, nl_index)
        args = self.query_args(tmp_path, meta, nl_index, cassette_path) + ["--trace"]
        capsys.readouterr()
        assert main(args) == EXIT_OK
        first = capsys.readouterr().out
        assert main(args) == EXIT_OK
        assert capsys.readouterr().out == first
        assert "retrieved 1." in first

    def test_fl_query_trace_shows_lean_translation(self, tmp_path, meta, capsys):
        _, fl_index = build_fixture_indexes(tmp_path, meta)
        question = "Sort 2, 0, 1 in increasing order."
        code = main(
            [
                "--config",
                str(write_provider_config(tmp_path, meta)),
                "query",
                "--mode",
                "fl",
                "--q",
                question,
                "--fl-corpus",
                str(E2E / "corpus_fl.jsonl"),
                "--fl-index",
                str(fl_index),
                "--chat-cassette",
                str(E2E / "cassettes" / "chat.json"),
                "--translation-cassette",
                str(E2E / "cassettes" / "translate.json"),
                "--trace",
            ]
        )
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "translation: theorem" in out
        assert "by sorry" in out

    def test_replay_miss_exits_nonzero_with_hash(self, tmp_path, meta, capsys):
        nl_index, _ = build_fixture_indexes(tmp_path, meta)
        empty = tmp_path / "empty.json"
        Cassette(empty).record("unused", "x", "m")
        code = main(
            [
                "query",
                "--mode",
                "nl",
                "--q",
                "A question nobody recorded?",
                "--corpus",
                str(E2E / "corpus_nl.jsonl"),
                "--nl-index",
                str(nl_index),
                "--chat-cassette",
                str(empty),
            ]
        )
        assert code == EXIT_CONFIG
        assert "replay miss for request hash" in capsys.readouterr().err


class TestEval:
    def test_fixture_eval_produces_reports(self, tmp_path, meta, capsys):
        nl_index, fl_index = build_fixture_indexes(tmp_path, meta)
        out_dir = tmp_path / "out"
        code = main(eval_args(tmp_path, out_dir, meta, nl_index, fl_index))
        assert code == EXIT_OK
        assert (out_dir / "report.json").exists()
        report_md = (out_dir / "report.md").read_text()
        assert report_md.count("|") > 0
        rows = [line for line in report_md.splitlines() if line.startswith("|")]
        assert len(rows) == 2 + 3  # header + separator + three categories
        assert "NL 50% | FL 80%" in capsys.readouterr().out

    def test_expect_categories_mismatch_is_fatal(self, tmp_path, meta, capsys):
        nl_index, fl_index = build_fixture_indexes(tmp_path, meta)
        args = eval_args(tmp_path, tmp_path / "out", meta, nl_index, fl_index)
        code = main(args + ["--expect-categories", "56"])
        assert code == EXIT_CONFIG
        assert "expected 56 categories" in capsys.readouterr().err

    def test_missing_cassette_entries_exit_1(self, tmp_path, meta, capsys):
        nl_index, fl_index = build_fixture_indexes(tmp_path, meta)
        # An extra benchmark question that was never recorded.
        bench = tmp_path / "benchmark"
        bench.mkdir()
        for src in (E2E / "benchmark").glob("*.txt"):
            (bench / src.name).write_text(src.read_text(), encoding="utf-8")
        extra = bench / "arithmetic__add_sub.txt"
        extra.write_text(extra.read_text() + "What is 1 plus 1?\n2\n", encoding="utf-8")
        args = eval_args(tmp_path, tmp_path / "out", meta, nl_index, fl_index)
        config_path = Path(args[1])
        config = json.loads(config_path.read_text())
        config["paths"]["benchmark_dir"] = str(bench)
        config_path.write_text(json.dumps(config))
        code = main(args)
        assert code == EXIT_QUESTION_FAILURES
        assert "question failures" in capsys.readouterr().out


class TestTranslateCorpus:
    def test_replay_translates_and_writes_fl_corpus(self, tmp_path, meta, capsys):
        out = tmp_path / "corpus_fl.jsonl"
        code = main(
            [
                "--config",
                str(write_provider_config(tmp_path, meta)),
                "translate-corpus",
                "--corpus",
                str(E2E / "corpus_nl.jsonl"),
                "--translation-cassette",
                str(E2E / "cassettes" / "translate.json"),
                "--out",
                str(out),
            ]
        )
        assert code == EXIT_OK
        assert "translated 12 documents, 0 failures" in capsys.readouterr().out
        assert read_corpus(out) == read_corpus(E2E / "corpus_fl.jsonl")

    def test_failures_exit_1_with_report(self, tmp_path, meta, capsys):
        empty_cassette = tmp_path / "empty.json"
        Cassette(empty_cassette).record("unused", "x", "m")
        failures_out = tmp_path / "failures.json"
        code = main(
            [
                "--config",
                str(write_provider_config(tmp_path, meta)),
                "translate-corpus",
                "--corpus",
                str(E2E / "corpus_nl.jsonl"),
                "--translation-cassette",
                str(empty_cassette),
                "--out",
                str(tmp_path / "corpus_fl.jsonl"),
                "--failures-out",
                str(failures_out),
            ]
        )
        assert code == EXIT_QUESTION_FAILURES
        failures = json.loads(failures_out.read_text())
        assert len(failures) == 12
        assert all(f["kind"] == "replay_miss" for f in failures)


class TestReport:
    def test_reaggregates_trace(self, tmp_path, meta, capsys):
        nl_index, fl_index = build_fixture_indexes(tmp_path, meta)
        out_dir = tmp_path / "out"
        main(eval_args(tmp_path, out_dir, meta, nl_index, fl_index))
        report_dir = tmp_path / "replayed"
        code = main(
            [
                "report",
                "--trace-file",
                str(out_dir / "trace.jsonl"),
                "--out-dir",
                str(report_dir),
            ]
        )
        assert code == EXIT_OK
        assert (report_dir / "report.json").read_bytes() == (out_dir / "report.json").read_bytes()


class TestConfig:
    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"pipeline": {"topk": 3}}))
        with pytest.raises(ValueError, match="unknown config key"):
            load_config(path)

    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"pipelines": {}}))
        with pytest.raises(ValueError, match="unknown config section"):
            load_config(path)

    def test_flags_override_config(self, tmp_path, capsys):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"pipeline": {"seed": 7}}))
        config = load_config(path)
        assert config.seed == 7

    def test_bad_config_exits_2(self, tmp_path, capsys):
        path = tmp_path / "config.json"
        path.write_text("{not json")
        code = main(["--config", str(path), "ingest", "--out", "x"])
        assert code == EXIT_CONFIG

    def test_replay_mode_requires_cassette_path(self, tmp_path, meta, capsys):
        nl_index, _ = build_fixture_indexes(tmp_path, meta)
        code = main(
            [
                "query",
                "--mode",
                "nl",
                "--q",
                "anything",
                "--corpus",
                str(E2E / "corpus_nl.jsonl"),
                "--nl-index",
                str(nl_index),
            ]
        )
        assert code == EXIT_CONFIG
        assert "cassette" in capsys.readouterr().err
