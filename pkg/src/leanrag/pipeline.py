"""The two retrieval-augmented pipelines.

NL mode embeds the question and retrieves NL documents. FL mode first
translates the question to a Lean statement, embeds that, and retrieves
Lean documents — but the generation prompt always pairs the retrieved
context with the original NL question, and both modes share one system
prompt.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .clients import ChatClient, ProviderError, ReplayMiss, chat
from .domain import BenchmarkQuestion, CorpusDocument, PipelineConfig, RetrievedDocument
from .embedding import Embedder, truncate_for_embedding
from .formalize import LeanStatement, LintFailure, translate_to_lean
from .vindex import VectorIndex, top_k

SYSTEM_PROMPT = (
    "Solve the following math problem. Give the final answer within {}. "
    "Like so: the final answer is {answer}"
)

CONTEXT_SEPARATOR = "\n---\n"

FAILURE_TRANSLATION = "translation_failed"
FAILURE_PROVIDER = "provider_error"


@dataclass(frozen=True)
class IndexedCorpus:
    """A vector index plus the documents it was built from, keyed by id."""

    index: VectorIndex
    documents: Mapping[str, CorpusDocument]

    def __post_init__(self) -> None:
        missing = [doc_id for doc_id in self.index.doc_ids if doc_id not in self.documents]
        if missing:
            raise ValueError(f"index ids missing from corpus: {missing[:5]}")


@dataclass(frozen=True)
class GenerationResult:
    """Full trace of one pipeline run for a single question."""

    question_id: str
    mode: str
    retrieved: tuple[RetrievedDocument, ...]
    prompt: str
    generation: str
    translation: LeanStatement | None = None
    failure: str | None = None

    def __post_init__(self) -> None:
        if self.failure not in (None, FAILURE_TRANSLATION, FAILURE_PROVIDER):
            raise ValueError(f"unknown failure kind {self.failure!r}")
        if self.mode == "fl" and self.translation is None and self.failure is None:
            raise ValueError("fl results must carry a translation or a failure")


def assemble_prompt(query: str, docs: list[str]) -> tuple[str, str]:
    """Build the (system, user) message pair for generation."""
    if docs:
        user = f"Context:\n{CONTEXT_SEPARATOR.join(docs)}\n\nQuestion: {query}"
    else:
        user = f"Question: {query}"
    return SYSTEM_PROMPT, user


def render_full_prompt(system: str, user: str) -> str:
    return f"{system}\n\n{user}"


@dataclass
class PipelineClients:
    """The provider clients one pipeline run needs."""

    embedder: Embedder
    chat: ChatClient
    translator: ChatClient | None = None

    @property
    def translation_client(self) -> ChatClient:
        return self.translator if self.translator is not None else self.chat


def _generate(
    system: str,
    user: str,
    config: PipelineConfig,
    clients: PipelineClients,
) -> tuple[str, str | None]:
    """Call the generation model; returns (text, failure_kind)."""
    try:
        return chat(clients.chat, system, user, config.generation_model), None
    except ReplayMiss:
        if config.strict_replay:
            raise
        return "", FAILURE_PROVIDER
    except ProviderError:
        return "", FAILURE_PROVIDER


def run_nl_pipeline(
    question: BenchmarkQuestion,
    corpus: IndexedCorpus,
    config: PipelineConfig,
    clients: PipelineClients,
) -> GenerationResult:
    """Embed the question, retrieve NL context, and generate an answer."""
    query_vector = clients.embedder.embed(truncate_for_embedding(question.question_text))
    hits = top_k(corpus.index, query_vector, config.top_k)
    docs = [corpus.documents[hit.doc_id].nl_text for hit in hits]
    system, user = assemble_prompt(question.question_text, docs)
    generation, failure = _generate(system, user, config, clients)
    return GenerationResult(
        question_id=question.question_id,
        mode="nl",
        retrieved=tuple(hits),
        prompt=render_full_prompt(system, user),
        generation=generation,
        failure=failure,
    )


def run_fl_pipeline(
    question: BenchmarkQuestion,
    corpus: IndexedCorpus,
    config: PipelineConfig,
    clients: PipelineClients,
) -> GenerationResult:
    """Translate to Lean, retrieve Lean context, and generate from the NL query.

    A translation that fails lint falls back to empty-context generation so
    a benchmark sweep never dies on one bad formalization.
    """
    translation: LeanStatement | None = None
    try:
        translation = translate_to_lean(question.question_text, clients.translation_client, config)
    except LintFailure:
        system, user = assemble_prompt(question.question_text, [])
        generation, _ = _generate(system, user, config, clients)
        return GenerationResult(
            question_id=question.question_id,
            mode="fl",
            retrieved=(),
            prompt=render_full_prompt(system, user),
            generation=generation,
            failure=FAILURE_TRANSLATION,
        )
    except ReplayMiss:
        if config.strict_replay:
            raise
        return _fl_provider_failure(question)
    except ProviderError:
        return _fl_provider_failure(question)

    query_vector = clients.embedder.embed(truncate_for_embedding(translation.text))
    hits = top_k(corpus.index, query_vector, config.top_k)
    docs = []
    for hit in hits:
        fl_text = corpus.documents[hit.doc_id].fl_text
        if fl_text is None:
            raise ValueError(f"document {hit.doc_id!r} has no fl_text in the FL corpus")
        docs.append(fl_text)
    system, user = assemble_prompt(question.question_text, docs)
    generation, failure = _generate(system, user, config, clients)
    return GenerationResult(
        question_id=question.question_id,
        mode="fl",
        retrieved=tuple(hits),
        prompt=render_full_prompt(system, user),
        generation=generation,
        translation=translation,
        failure=failure,
    )


def _fl_provider_failure(question: BenchmarkQuestion) -> GenerationResult:
    return GenerationResult(
        question_id=question.question_id,
        mode="fl",
        retrieved=(),
        prompt="",
        generation="",
        failure=FAILURE_PROVIDER,
    )


def run_pipeline(
    question: BenchmarkQuestion,
    corpus: IndexedCorpus,
    config: PipelineConfig,
    clients: PipelineClients,
) -> GenerationResult:
    if config.mode == "nl":
        return run_nl_pipeline(question, corpus, config, clients)
    return run_fl_pipeline(question, corpus, config, clients)


def generation_result_to_json(result: GenerationResult) -> dict:
    return {
        "question_id": result.question_id,
        "mode": result.mode,
        "retrieved": [
            {"doc_id": hit.doc_id, "similarity": hit.similarity, "rank": hit.rank}
            for hit in result.retrieved
        ],
        "prompt": result.prompt,
        "generation": result.generation,
        "translation": (
            {"text": result.translation.text, "source_hash": result.translation.source_hash}
            if result.translation is not None
            else None
        ),
        "failure": result.failure,
    }


def generation_result_from_json(obj: dict) -> GenerationResult:
    translation = obj.get("translation")
    return GenerationResult(
        question_id=obj["question_id"],
        mode=obj["mode"],
        retrieved=tuple(
            RetrievedDocument(doc_id=h["doc_id"], similarity=h["similarity"], rank=h["rank"])
            for h in obj.get("retrieved", [])
        ),
        prompt=obj["prompt"],
        generation=obj["generation"],
        translation=(
            LeanStatement(text=translation["text"], source_hash=translation["source_hash"])
            if translation
            else None
        ),
        failure=obj.get("failure"),
    )
