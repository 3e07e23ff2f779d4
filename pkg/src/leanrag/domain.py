"""Core value types shared across the toolkit, plus content hashing.

Everything in this module is an immutable value: safe to share between
threads and to use as dict keys where hashable.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

if TYPE_CHECKING:
    from .grader import CanonicalAnswer

PIPELINE_MODES = ("nl", "fl")
EMBEDDING_PROVIDERS = ("local", "remote")
CLIENT_MODES = ("record", "replay", "live")
VERDICT_STATUSES = ("correct", "incorrect", "no_answer", "unparsed")

# Joined with NUL so ("ab", "c") and ("a", "bc") cannot collide.
_HASH_SEPARATOR = "\x00"


def content_hash(text: str) -> str:
    """SHA-256 of the UTF-8 byte sequence, lowercase hex (64 chars)."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def compound_hash(*parts: str) -> str:
    """Content hash of several strings treated as one keyed identity."""
    return content_hash(_HASH_SEPARATOR.join(parts))


class Source(str, Enum):
    """Provenance of a corpus document."""

    MATH_DATASET = "math_dataset"
    LEAN_WORKBOOK = "lean_workbook"
    OTHER = "other"


@dataclass(frozen=True)
class CorpusDocument:
    """One knowledge-base entry: NL text plus an optional Lean statement."""

    doc_id: str
    nl_text: str
    source: Source
    fl_text: str | None = None
    category: str | None = None

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise ValueError("doc_id must be nonempty")
        if not self.nl_text.strip():
            raise ValueError(f"document {self.doc_id!r}: nl_text is empty")
        if not isinstance(self.source, Source):
            object.__setattr__(self, "source", Source(self.source))
        if self.fl_text is not None:
            # Deferred import: formalize depends on this module.
            from .formalize import LintFailure, lint_lean_statement

            violations = lint_lean_statement(self.fl_text)
            if violations:
                raise LintFailure(violations, doc_id=self.doc_id)


@dataclass(frozen=True)
class BenchmarkQuestion:
    """A benchmark item: question text and its raw ground-truth answer."""

    question_id: str
    category: str
    question_text: str
    ground_truth: str

    def __post_init__(self) -> None:
        if not self.category.strip():
            raise ValueError("category must be nonempty")
        if not self.question_text.strip():
            raise ValueError(f"question {self.question_id!r}: empty question_text")
        if not self.ground_truth.strip():
            raise ValueError(f"question {self.question_id!r}: empty ground_truth")


@dataclass(frozen=True)
class EmbeddingVector:
    """Fixed-dimension real vector with provenance for cache keys."""

    values: tuple[float, ...]
    provider_id: str
    model_id: str
    content_hash: str

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("embedding vector must be non-empty")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding vector contains non-finite entries")
        if self.provider_id == "local" and abs(self.l2_norm() - 1.0) > 1e-9:
            raise ValueError("local embeddings must be unit-norm")

    @property
    def dim(self) -> int:
        return len(self.values)

    def l2_norm(self) -> float:
        return math.sqrt(math.fsum(v * v for v in self.values))


@dataclass(frozen=True)
class RetrievedDocument:
    """One retrieval hit: document id, cosine similarity, and 1-based rank."""

    doc_id: str
    similarity: float
    rank: int

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise ValueError("rank must be a positive integer")
        if not -1.0 - 1e-9 <= self.similarity <= 1.0 + 1e-9:
            raise ValueError(f"similarity {self.similarity} outside [-1, 1]")


@dataclass(frozen=True)
class PipelineConfig:
    """Settings for one pipeline run.

    strict_replay controls whether a cassette miss aborts the run or is
    recorded as a per-question provider failure.
    """

    mode: str
    generation_model: str
    translation_model: str = ""
    top_k: int = 3
    embedding_provider: str = "local"
    client_mode: str = "replay"
    seed: int = 42
    strict_replay: bool = False

    def __post_init__(self) -> None:
        if self.mode not in PIPELINE_MODES:
            raise ValueError(f"mode must be one of {PIPELINE_MODES}, got {self.mode!r}")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.embedding_provider not in EMBEDDING_PROVIDERS:
            raise ValueError(f"unknown embedding provider {self.embedding_provider!r}")
        if self.client_mode not in CLIENT_MODES:
            raise ValueError(f"unknown client mode {self.client_mode!r}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class Verdict:
    """Outcome of grading one generation against its ground truth."""

    status: str
    canonical_truth: "CanonicalAnswer"
    extracted: str | None = None
    canonical_model: "CanonicalAnswer | None" = None

    def __post_init__(self) -> None:
        if self.status not in VERDICT_STATUSES:
            raise ValueError(f"unknown verdict status {self.status!r}")
        if self.status == "no_answer" and self.extracted is not None:
            raise ValueError("no_answer verdict cannot carry an extracted answer")
        if self.status == "correct" and self.canonical_model is None:
            raise ValueError("correct verdict requires a canonical model answer")


def document_to_json(doc: CorpusDocument) -> dict:
    return {
        "doc_id": doc.doc_id,
        "nl_text": doc.nl_text,
        "fl_text": doc.fl_text,
        "source": doc.source.value,
        "category": doc.category,
    }


def document_from_json(obj: dict) -> CorpusDocument:
    return CorpusDocument(
        doc_id=obj["doc_id"],
        nl_text=obj["nl_text"],
        source=Source(obj["source"]),
        fl_text=obj.get("fl_text"),
        category=obj.get("category"),
    )


def write_corpus(documents: Iterable[CorpusDocument], path: str | Path) -> None:
    """Write documents as JSONL (UTF-8, LF line endings)."""
    docs = list(documents)
    seen: set[str] = set()
    for doc in docs:
        if doc.doc_id in seen:
            raise ValueError(f"duplicate doc_id {doc.doc_id!r} in corpus")
        seen.add(doc.doc_id)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            fh.write(json.dumps(document_to_json(doc), ensure_ascii=False))
            fh.write("\n")


def read_corpus(path: str | Path) -> list[CorpusDocument]:
    """Read a JSONL corpus; rejects duplicate doc_ids and malformed lines."""
    documents: list[CorpusDocument] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = document_from_json(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed corpus line: {exc}") from exc
            if doc.doc_id in seen:
                raise ValueError(f"{path}:{lineno}: duplicate doc_id {doc.doc_id!r}")
            seen.add(doc.doc_id)
            documents.append(doc)
    return documents
