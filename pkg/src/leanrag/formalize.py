"""Lean statement linting and NL→Lean translation through a chat model.

Linting is purely structural (prefix, proof suffix, ":=", balanced
delimiters); nothing here elaborates or type-checks Lean.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .clients import ChatClient, ProviderError, ReplayMiss, chat
from .domain import CorpusDocument, PipelineConfig, content_hash

TRANSLATION_PROMPT = "Translate statement into LEAN:"
PROOF_SUFFIX = "by sorry"
DEFAULT_TRANSLATE_PARALLELISM = 4

VIOLATION_MISSING_THEOREM = 'missing "theorem" prefix'
VIOLATION_MISSING_SUFFIX = 'missing "by sorry" suffix'
VIOLATION_MISSING_ASSIGN = 'missing ":="'

_DELIMITER_PAIRS = {"(": ")", "{": "}", "[": "]"}
_CLOSERS = {v: k for k, v in _DELIMITER_PAIRS.items()}


class LintFailure(Exception):
    """A statement violated one or more structural Lean conventions."""

    def __init__(self, violations: list[str], doc_id: str | None = None):
        self.violations = list(violations)
        self.doc_id = doc_id
        where = f" in {doc_id}" if doc_id else ""
        super().__init__(f"lint failed{where}: {'; '.join(self.violations)}")


def lint_lean_statement(text: str) -> list[str]:
    """Return all structural violations; an empty list means the text is ok."""
    violations: list[str] = []
    trimmed = text.strip()
    first_token = trimmed.split(maxsplit=1)[0] if trimmed else ""
    if first_token != "theorem":
        violations.append(VIOLATION_MISSING_THEOREM)
    has_suffix = trimmed.endswith(PROOF_SUFFIX)
    if not has_suffix:
        violations.append(VIOLATION_MISSING_SUFFIX)
    body = trimmed[: -len(PROOF_SUFFIX)] if has_suffix else trimmed
    if ":=" not in body:
        violations.append(VIOLATION_MISSING_ASSIGN)
    violations.extend(_delimiter_violations(trimmed))
    return violations


def _delimiter_violations(text: str) -> list[str]:
    stack: list[str] = []
    bad: list[str] = []
    for ch in text:
        if ch in _DELIMITER_PAIRS:
            stack.append(ch)
        elif ch in _CLOSERS:
            if stack and stack[-1] == _CLOSERS[ch]:
                stack.pop()
            else:
                bad.append(ch)
    bad.extend(stack)
    # One violation per delimiter kind, in first-seen order.
    out: list[str] = []
    for ch in bad:
        violation = f'unbalanced "{ch}"'
        if violation not in out:
            out.append(violation)
    return out


@dataclass(frozen=True)
class LeanStatement:
    """A linted Lean theorem statement tied to the hash of its NL origin."""

    text: str
    source_hash: str

    def __post_init__(self) -> None:
        violations = lint_lean_statement(self.text)
        if violations:
            raise LintFailure(violations)


def repair_proof_suffix(text: str) -> str:
    """Append "by sorry" once if absent; idempotent on compliant statements."""
    trimmed = text.strip()
    if trimmed.endswith(PROOF_SUFFIX):
        return trimmed
    return f"{trimmed} {PROOF_SUFFIX}"


def translate_to_lean(nl: str, client: ChatClient, config: PipelineConfig) -> LeanStatement:
    """Translate one NL statement to Lean; raises LintFailure on bad output."""
    reply = chat(client, TRANSLATION_PROMPT, nl, config.translation_model)
    text = repair_proof_suffix(reply.strip())
    violations = lint_lean_statement(text)
    if violations:
        raise LintFailure(violations)
    return LeanStatement(text=text, source_hash=content_hash(nl))


@dataclass(frozen=True)
class TranslationFailure:
    doc_id: str
    kind: str  # "lint" | "replay_miss" | "provider_error"
    detail: str


@dataclass
class TranslationReport:
    """Per-document translations plus failures, both in doc_id order."""

    translations: dict[str, str]
    failures: list[TranslationFailure]


def translate_corpus(
    nl_corpus: list[CorpusDocument],
    client: ChatClient,
    config: PipelineConfig,
    parallelism: int = DEFAULT_TRANSLATE_PARALLELISM,
) -> TranslationReport:
    """Translate every document's nl_text; failures are collected, not fatal."""
    ordered = sorted(nl_corpus, key=lambda d: d.doc_id)

    def translate_one(doc: CorpusDocument):
        try:
            return doc.doc_id, translate_to_lean(doc.nl_text, client, config).text, None
        except LintFailure as exc:
            return doc.doc_id, None, TranslationFailure(doc.doc_id, "lint", str(exc))
        except ReplayMiss as exc:
            return doc.doc_id, None, TranslationFailure(doc.doc_id, "replay_miss", exc.key)
        except ProviderError as exc:
            return doc.doc_id, None, TranslationFailure(doc.doc_id, "provider_error", str(exc))

    report = TranslationReport(translations={}, failures=[])
    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as executor:
        for doc_id, text, failure in executor.map(translate_one, ordered):
            if failure is not None:
                report.failures.append(failure)
            else:
                report.translations[doc_id] = text
    return report
