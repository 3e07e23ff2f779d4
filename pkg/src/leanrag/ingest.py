"""Loaders for the three external dataset formats.

Malformed records in scraped datasets are skipped and counted rather than
aborting the load; the counts surface data quality to the caller.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .domain import BenchmarkQuestion, CorpusDocument, Source
from .formalize import PROOF_SUFFIX, LintFailure, lint_lean_statement


class MalformedRecord(ValueError):
    """A dataset record is missing required fields or otherwise unusable."""


class OddLineCount(ValueError):
    """A benchmark file ended with an unpaired question line."""


class MissingTranslation(ValueError):
    """Documents lacked translation entries when building the FL corpus."""

    def __init__(self, doc_ids: list[str]):
        self.doc_ids = list(doc_ids)
        super().__init__(f"missing translations for: {', '.join(self.doc_ids)}")


@dataclass(frozen=True)
class StatementPair:
    """An NL statement paired with its Lean translation."""

    nl_statement: str
    lean_statement: str

    def __post_init__(self) -> None:
        if not self.lean_statement.strip().endswith(PROOF_SUFFIX):
            raise ValueError(f'lean_statement must end with "{PROOF_SUFFIX}"')


@dataclass
class MathCorpusLoad:
    documents: list[CorpusDocument]
    skipped: list[str]  # paths of malformed files


@dataclass
class StatementPairLoad:
    pairs: list[StatementPair]
    rejected_suffix: int = 0
    malformed: int = 0


def load_math_corpus(directory: str | Path) -> MathCorpusLoad:
    """Load problem/solution JSON files into corpus documents.

    One document per file, in lexicographic path order; nl_text is the
    problem, a blank line, then the solution.
    """
    root = Path(directory)
    if not root.is_dir():
        raise IOError(f"not a directory: {root}")
    paths = sorted(root.rglob("*.json"), key=lambda p: p.relative_to(root).as_posix())
    documents: list[CorpusDocument] = []
    skipped: list[str] = []
    for path in paths:
        try:
            record = json.loads(path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError):
            skipped.append(str(path))
            continue
        if not isinstance(record, dict) or "problem" not in record or "solution" not in record:
            skipped.append(str(path))
            continue
        documents.append(
            CorpusDocument(
                doc_id=f"{Source.MATH_DATASET.value}:{len(documents):06d}",
                nl_text=f"{record['problem']}\n\n{record['solution']}",
                source=Source.MATH_DATASET,
                category=record.get("type"),
            )
        )
    return MathCorpusLoad(documents=documents, skipped=skipped)


def load_benchmark(directory: str | Path) -> list[BenchmarkQuestion]:
    """Load per-category question files of alternating question/answer lines."""
    root = Path(directory)
    if not root.is_dir():
        raise IOError(f"not a directory: {root}")
    questions: list[BenchmarkQuestion] = []
    for path in sorted(root.glob("*.txt"), key=lambda p: p.name):
        category = path.stem
        lines = path.read_text(encoding="utf-8").splitlines()
        if len(lines) % 2 != 0:
            raise OddLineCount(f"{path.name}: odd line count {len(lines)}")
        for ordinal, i in enumerate(range(0, len(lines), 2), start=1):
            question_line, answer_line = lines[i], lines[i + 1]
            if not question_line.strip() or not answer_line.strip():
                raise MalformedRecord(f"{path.name}: empty line in pair {ordinal}")
            questions.append(
                BenchmarkQuestion(
                    question_id=f"{category}#{ordinal:04d}",
                    category=category,
                    question_text=question_line.strip(),
                    ground_truth=answer_line.strip(),
                )
            )
    return questions


def load_statement_pairs(path: str | Path) -> StatementPairLoad:
    """Load NL/Lean statement pairs from JSONL, in file order."""
    result = StatementPairLoad(pairs=[])
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                nl = record["natural_language"]
                fl = record["formal_statement"]
            except (json.JSONDecodeError, KeyError, TypeError):
                result.malformed += 1
                continue
            if not isinstance(fl, str) or not fl.strip().endswith(PROOF_SUFFIX):
                result.rejected_suffix += 1
                continue
            result.pairs.append(StatementPair(nl_statement=nl, lean_statement=fl))
    return result


def build_fl_corpus(
    nl_corpus: list[CorpusDocument],
    translations: dict[str, str],
) -> list[CorpusDocument]:
    """Populate fl_text from translations, keeping doc_ids aligned one-to-one."""
    missing = [doc.doc_id for doc in nl_corpus if doc.doc_id not in translations]
    if missing:
        raise MissingTranslation(missing)
    lint_failures: list[tuple[str, list[str]]] = []
    for doc in nl_corpus:
        violations = lint_lean_statement(translations[doc.doc_id])
        if violations:
            lint_failures.append((doc.doc_id, violations))
    if lint_failures:
        messages = [f"{doc_id}: {', '.join(v)}" for doc_id, v in lint_failures]
        raise LintFailure(messages, doc_id=lint_failures[0][0])
    return [
        CorpusDocument(
            doc_id=doc.doc_id,
            nl_text=doc.nl_text,
            source=doc.source,
            fl_text=translations[doc.doc_id],
            category=doc.category,
        )
        for doc in nl_corpus
    ]
