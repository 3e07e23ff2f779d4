"""Command-line entry point: ingest, translate-corpus, build, query, eval, report.

A run is described by one JSON config file; command-line flags override
config values. Credentials are never stored in the config — only the name
of the environment variable that holds them.

Exit codes: 0 success, 1 evaluation completed with per-question failures,
2 configuration or environment error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import clients as clients_mod
from .clients import Cassette, ChatClient, EmbeddingClient, ProviderError, ReplayMiss
from .domain import (
    BenchmarkQuestion,
    PipelineConfig,
    read_corpus,
    write_corpus,
)
from .embedding import (
    CachedEmbedder,
    Embedder,
    EmbeddingCache,
    LocalEmbedder,
    RemoteEmbedder,
    embed_many,
    truncate_for_embedding,
)
from .evalharness import (
    aggregate,
    emit_report,
    read_trace,
    render_summary,
    run_eval,
    sample_questions,
)
from .formalize import LintFailure, translate_corpus
from .ingest import build_fl_corpus, load_benchmark, load_math_corpus
from .pipeline import IndexedCorpus, PipelineClients, run_pipeline
from .vindex import build_index, load_index, save_index

EXIT_OK = 0
EXIT_QUESTION_FAILURES = 1
EXIT_CONFIG = 2


class ConfigError(ValueError):
    """The config file is malformed or references missing resources."""


@dataclass
class RunConfig:
    """Strictly-parsed run description; unknown keys are rejected."""

    # paths
    corpus: str | None = None
    fl_corpus: str | None = None
    nl_index: str | None = None
    fl_index: str | None = None
    cache_dir: str | None = None
    chat_cassette: str | None = None
    translation_cassette: str | None = None
    embedding_cassette: str | None = None
    trace: str | None = None
    report_dir: str | None = None
    benchmark_dir: str | None = None
    math_dir: str | None = None
    # provider
    chat_endpoint: str | None = None
    embedding_endpoint: str | None = None
    generation_model: str = "gpt-4o"
    translation_model: str = "gpt-4o-mini"
    embedding_model: str = "text-embedding-ada-002"
    api_key_env: str = "LEANRAG_API_KEY"
    # pipeline
    mode: str = "nl"
    top_k: int = 3
    parallelism: int = 8
    seed: int = 42
    client_mode: str = "replay"
    embedding_provider: str = "local"
    local_dim: int = 256
    strict_replay: bool = False
    truncation_chars: int = 6000

    _SECTIONS = {
        "paths": (
            "corpus",
            "fl_corpus",
            "nl_index",
            "fl_index",
            "cache_dir",
            "chat_cassette",
            "translation_cassette",
            "embedding_cassette",
            "trace",
            "report_dir",
            "benchmark_dir",
            "math_dir",
        ),
        "provider": (
            "chat_endpoint",
            "embedding_endpoint",
            "generation_model",
            "translation_model",
            "embedding_model",
            "api_key_env",
        ),
        "pipeline": (
            "mode",
            "top_k",
            "parallelism",
            "seed",
            "client_mode",
            "embedding_provider",
            "local_dim",
            "strict_replay",
            "truncation_chars",
        ),
    }


def load_config(path: str | Path) -> RunConfig:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError("config root must be a JSON object")
    config = RunConfig()
    valid_fields = {f.name for f in fields(RunConfig)}
    for section, values in obj.items():
        if section not in RunConfig._SECTIONS:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(values, dict):
            raise ConfigError(f"config section {section!r} must be an object")
        for key, value in values.items():
            if key not in RunConfig._SECTIONS[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
            assert key in valid_fields
            setattr(config, key, value)
    return config


def _apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    overridable = {f.name for f in fields(RunConfig)}
    for key, value in vars(args).items():
        if key in overridable and value is not None:
            setattr(config, key, value)
    return config


def _pipeline_config(config: RunConfig, mode: str) -> PipelineConfig:
    return PipelineConfig(
        mode=mode,
        generation_model=config.generation_model,
        translation_model=config.translation_model,
        top_k=config.top_k,
        embedding_provider=config.embedding_provider,
        client_mode=config.client_mode,
        seed=config.seed,
        strict_replay=config.strict_replay,
    )


def _open_cassette(config: RunConfig, path: str | None, what: str) -> Cassette | None:
    if config.client_mode == "live":
        return None
    if path is None:
        raise ConfigError(f"{config.client_mode} mode requires a {what} cassette path")
    try:
        return Cassette.open(path, create=config.client_mode == "record")
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from exc


def _build_embedder(config: RunConfig) -> Embedder:
    if config.embedding_provider == "local":
        embedder: Embedder = LocalEmbedder(dim=config.local_dim)
    else:
        transport = None
        if config.client_mode in ("live", "record"):
            if not config.embedding_endpoint:
                raise ConfigError("remote embedding requires provider.embedding_endpoint")
            transport = clients_mod.openai_embedding_transport(
                config.embedding_endpoint, config.api_key_env
            )
        client = EmbeddingClient(
            mode=config.client_mode,
            cassette=_open_cassette(config, config.embedding_cassette, "embedding"),
            transport=transport,
        )
        embedder = RemoteEmbedder(client=client, model_id=config.embedding_model)
    if config.cache_dir:
        embedder = CachedEmbedder(inner=embedder, cache=EmbeddingCache(config.cache_dir))
    return embedder


def _build_chat_client(config: RunConfig, cassette_path: str | None) -> ChatClient:
    transport = None
    if config.client_mode in ("live", "record"):
        if not config.chat_endpoint:
            raise ConfigError("live/record chat requires provider.chat_endpoint")
        transport = clients_mod.openai_chat_transport(config.chat_endpoint, config.api_key_env)
    return ChatClient(
        mode=config.client_mode,
        cassette=_open_cassette(config, cassette_path, "chat"),
        transport=transport,
    )


def _build_clients(config: RunConfig) -> PipelineClients:
    translator_path = config.translation_cassette or config.chat_cassette
    return PipelineClients(
        embedder=_build_embedder(config),
        chat=_build_chat_client(config, config.chat_cassette),
        translator=_build_chat_client(config, translator_path),
    )


def _load_indexed_corpus(index_path: str, corpus_path: str) -> IndexedCorpus:
    index = load_index(index_path)
    documents = {doc.doc_id: doc for doc in read_corpus(corpus_path)}
    return IndexedCorpus(index=index, documents=documents)


# --- commands -------------------------------------------------------------


def cmd_ingest(config: RunConfig, args: argparse.Namespace) -> int:
    if not config.math_dir:
        raise ConfigError("ingest requires --math-dir")
    if not args.out:
        raise ConfigError("ingest requires --out")
    load = load_math_corpus(config.math_dir)
    write_corpus(load.documents, args.out)
    print(f"ingested {len(load.documents)} documents, skipped {len(load.skipped)}")
    for path in load.skipped:
        print(f"  skipped: {path}", file=sys.stderr)
    return EXIT_OK


def cmd_translate_corpus(config: RunConfig, args: argparse.Namespace) -> int:
    if not config.corpus:
        raise ConfigError("translate-corpus requires --corpus")
    if not args.out:
        raise ConfigError("translate-corpus requires --out")
    documents = read_corpus(config.corpus)
    translator = _build_chat_client(
        config, config.translation_cassette or config.chat_cassette
    )
    pipeline_config = _pipeline_config(config, "fl")
    report = translate_corpus(documents, translator, pipeline_config, config.parallelism)
    translated_docs = [doc for doc in documents if doc.doc_id in report.translations]
    fl_documents = build_fl_corpus(translated_docs, report.translations)
    write_corpus(fl_documents, args.out)
    print(
        f"translated {len(report.translations)} documents, "
        f"{len(report.failures)} failures"
    )
    for failure in report.failures:
        print(f"  {failure.doc_id}: {failure.kind}: {failure.detail}", file=sys.stderr)
    if args.failures_out:
        Path(args.failures_out).write_text(
            json.dumps(
                [
                    {"doc_id": f.doc_id, "kind": f.kind, "detail": f.detail}
                    for f in report.failures
                ],
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
    return EXIT_QUESTION_FAILURES if report.failures else EXIT_OK


def cmd_build(config: RunConfig, args: argparse.Namespace) -> int:
    if not config.corpus:
        raise ConfigError("build requires --corpus")
    if not args.out:
        raise ConfigError("build requires --out")
    documents = read_corpus(config.corpus)
    if config.mode == "fl":
        for doc in documents:
            if doc.fl_text is None:
                raise ConfigError(f"document {doc.doc_id!r} has no fl_text")
        texts = [truncate_for_embedding(doc.fl_text, config.truncation_chars) for doc in documents]
    else:
        texts = [truncate_for_embedding(doc.nl_text, config.truncation_chars) for doc in documents]
    embedder = _build_embedder(config)
    vectors = embed_many(texts, embedder, config.parallelism)
    index = build_index(list(zip((doc.doc_id for doc in documents), vectors)))
    save_index(index, args.out)
    print(f"indexed {len(index)} documents (dim {index.dim}) -> {args.out}")
    return EXIT_OK


def cmd_query(config: RunConfig, args: argparse.Namespace) -> int:
    index_path = config.fl_index if config.mode == "fl" else config.nl_index
    corpus_path = config.fl_corpus if config.mode == "fl" else config.corpus
    if not index_path or not corpus_path:
        raise ConfigError("query requires an index and corpus for the selected mode")
    corpus = _load_indexed_corpus(index_path, corpus_path)
    clients = _build_clients(config)
    # Single-shot queries surface replay misses rather than burying them.
    pipeline_config = PipelineConfig(
        mode=config.mode,
        generation_model=config.generation_model,
        translation_model=config.translation_model,
        top_k=config.top_k,
        embedding_provider=config.embedding_provider,
        client_mode=config.client_mode,
        seed=config.seed,
        strict_replay=True,
    )
    question = BenchmarkQuestion(
        question_id="adhoc#0001",
        category="adhoc",
        question_text=args.q,
        ground_truth="n/a",  # unused by the pipelines
    )
    result = run_pipeline(question, corpus, pipeline_config, clients)
    if args.show_trace:
        for hit in result.retrieved:
            print(f"retrieved {hit.rank}. {hit.doc_id} (similarity {hit.similarity:.6f})")
        if result.translation is not None:
            print(f"translation: {result.translation.text}")
        if result.failure is not None:
            print(f"failure: {result.failure}")
    print(result.generation)
    return EXIT_OK


def cmd_eval(config: RunConfig, args: argparse.Namespace) -> int:
    if not config.benchmark_dir:
        raise ConfigError("eval requires --benchmark-dir")
    if not (config.nl_index and config.fl_index and config.corpus and config.fl_corpus):
        raise ConfigError("eval requires NL/FL indices and corpora")
    out_dir = Path(args.out_dir or config.report_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    questions = load_benchmark(config.benchmark_dir)
    categories = sorted({q.category for q in questions})
    if args.expect_categories is not None and len(categories) != args.expect_categories:
        raise ConfigError(
            f"expected {args.expect_categories} categories, found {len(categories)}"
        )
    sample = sample_questions(questions, args.per_category, config.seed)
    nl_corpus = _load_indexed_corpus(config.nl_index, config.corpus)
    fl_corpus = _load_indexed_corpus(config.fl_index, config.fl_corpus)
    clients = _build_clients(config)
    trace_path = Path(config.trace) if config.trace else out_dir / "trace.jsonl"
    run = run_eval(
        sample,
        nl_corpus,
        fl_corpus,
        _pipeline_config(config, config.mode),
        clients,
        trace_path,
        parallelism=config.parallelism,
        generations_path=args.generations_out,
    )
    report = aggregate(run.records)
    (out_dir / "report.json").write_bytes(emit_report(report, "json"))
    (out_dir / "report.md").write_bytes(emit_report(report, "markdown"))
    print(render_summary(report))
    print(
        f"{len(run.records)} verdicts ({run.new_records} new), "
        f"{len(run.failures)} question failures"
    )
    for failure in run.failures:
        print(f"  {failure.question_id} [{failure.mode}]: {failure.reason}", file=sys.stderr)
    return EXIT_QUESTION_FAILURES if run.failures else EXIT_OK


def cmd_report(config: RunConfig, args: argparse.Namespace) -> int:
    trace_path = args.trace_file or config.trace
    if not trace_path:
        raise ConfigError("report requires --trace-file")
    records = read_trace(trace_path)
    if not records:
        raise ConfigError(f"no verdicts found in {trace_path}")
    report = aggregate(records)
    out_dir = Path(args.out_dir or config.report_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_bytes(emit_report(report, "json"))
    (out_dir / "report.md").write_bytes(emit_report(report, "markdown"))
    print(render_summary(report))
    return EXIT_OK


# --- argument parsing ------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leanrag",
        description="Compare natural-language and Lean-formalized retrieval for math QA.",
    )
    parser.add_argument("--config", help="path to a JSON run config")
    parser.add_argument(
        "--client-mode", dest="client_mode", choices=["record", "replay", "live"]
    )
    parser.add_argument("--seed", type=int)
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="load a problem/solution dataset into a corpus")
    p_ingest.add_argument("--math-dir", dest="math_dir")
    p_ingest.add_argument("--out", required=True)

    p_translate = sub.add_parser(
        "translate-corpus", help="translate a corpus to Lean and write the FL corpus"
    )
    p_translate.add_argument("--corpus", dest="corpus")
    p_translate.add_argument("--out", required=True)
    p_translate.add_argument("--failures-out")
    p_translate.add_argument("--translation-cassette", dest="translation_cassette")
    p_translate.add_argument("--parallelism", dest="parallelism", type=int)

    p_build = sub.add_parser("build", help="embed a corpus and write a vector index")
    p_build.add_argument("--corpus", dest="corpus")
    p_build.add_argument("--mode", dest="mode", choices=["nl", "fl"])
    p_build.add_argument("--provider", dest="embedding_provider", choices=["local", "remote"])
    p_build.add_argument("--dim", dest="local_dim", type=int)
    p_build.add_argument("--cache-dir", dest="cache_dir")
    p_build.add_argument("--embedding-cassette", dest="embedding_cassette")
    p_build.add_argument("--out", required=True)

    p_query = sub.add_parser("query", help="answer one question through a pipeline")
    p_query.add_argument("--mode", dest="mode", choices=["nl", "fl"])
    p_query.add_argument("--q", required=True)
    p_query.add_argument("--trace", dest="show_trace", action="store_true")
    p_query.add_argument("--corpus", dest="corpus")
    p_query.add_argument("--fl-corpus", dest="fl_corpus")
    p_query.add_argument("--nl-index", dest="nl_index")
    p_query.add_argument("--fl-index", dest="fl_index")
    p_query.add_argument("--chat-cassette", dest="chat_cassette")
    p_query.add_argument("--translation-cassette", dest="translation_cassette")
    p_query.add_argument("--top-k", dest="top_k", type=int)

    p_eval = sub.add_parser("eval", help="run the benchmark through both pipelines")
    p_eval.add_argument("--benchmark-dir", dest="benchmark_dir")
    p_eval.add_argument("--corpus", dest="corpus")
    p_eval.add_argument("--fl-corpus", dest="fl_corpus")
    p_eval.add_argument("--nl-index", dest="nl_index")
    p_eval.add_argument("--fl-index", dest="fl_index")
    p_eval.add_argument("--chat-cassette", dest="chat_cassette")
    p_eval.add_argument("--translation-cassette", dest="translation_cassette")
    p_eval.add_argument("--trace", dest="trace")
    p_eval.add_argument("--per-category", type=int, default=10)
    p_eval.add_argument("--expect-categories", type=int)
    p_eval.add_argument("--out-dir")
    p_eval.add_argument("--generations-out")
    p_eval.add_argument("--strict-replay", dest="strict_replay", action="store_true", default=None)
    p_eval.add_argument("--top-k", dest="top_k", type=int)

    p_report = sub.add_parser("report", help="re-aggregate an existing verdict trace")
    p_report.add_argument("--trace-file")
    p_report.add_argument("--out-dir")

    return parser


COMMANDS = {
    "ingest": cmd_ingest,
    "translate-corpus": cmd_translate_corpus,
    "build": cmd_build,
    "query": cmd_query,
    "eval": cmd_eval,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config) if args.config else RunConfig()
        config = _apply_overrides(config, args)
        return COMMANDS[args.command](config, args)
    except ReplayMiss as exc:
        print(f"error: replay miss for request hash {exc.key}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, LintFailure, ProviderError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
