"""Shared fixtures and scripted provider transports."""
from __future__ import annotations

import re
from pathlib import Path

import pytest

from leanrag.domain import CorpusDocument, Source, content_hash
from leanrag.formalize import TRANSLATION_PROMPT

FIXTURES = Path(__file__).parent / "fixtures"

_IDENT_RE = re.compile(r"[^a-z0-9 ]")


def lean_statement_for(nl_text: str) -> str:
    """Deterministic, lint-clean stand-in translation for a NL statement.

    Carries a few sanitized content words so retrieval over these
    statements stays text-sensitive.
    """
    words = _IDENT_RE.sub("", nl_text.lower()).split()[:6]
    ident = "_".join(words) or "statement"
    return (
        f"theorem auto_{content_hash(nl_text)[:12]} (x : ℝ) : "
        f"{ident} + 0 = x := by sorry"
    )


def scripted_transport(answers: dict[str, str] | None = None, calls: list | None = None):
    """Chat transport that translates deterministically and answers from a table."""

    def transport(model: str, system: str, user: str) -> str:
        if calls is not None:
            calls.append((model, system, user))
        if system == TRANSLATION_PROMPT:
            return lean_statement_for(user)
        question = user.rsplit("Question: ", 1)[-1]
        if answers and question in answers:
            return answers[question]
        return "The final answer is {0}."

    return transport


def make_documents(count: int, with_fl: bool = False) -> list[CorpusDocument]:
    docs = []
    for i in range(count):
        nl = f"Problem {i}: compute {i} + {i + 1}.\n\nSolution: the sum is {2 * i + 1}."
        docs.append(
            CorpusDocument(
                doc_id=f"other:{i:06d}",
                nl_text=nl,
                source=Source.OTHER,
                fl_text=lean_statement_for(nl) if with_fl else None,
                category="arithmetic__add",
            )
        )
    return docs


@pytest.fixture
def sample_documents() -> list[CorpusDocument]:
    return make_documents(5)
