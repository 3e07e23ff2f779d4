"""Benchmark sampling, dual-pipeline evaluation sweeps, and accuracy reports.

Overall accuracy is the unweighted mean of per-category accuracies; the
absolute difference is reported in percentage points and the relative
boost as a percent of the baseline. Values stay at full precision until
rendering, which rounds to the nearest integer, half away from zero.
"""
from __future__ import annotations

import json
import math
import random
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .domain import BenchmarkQuestion, PipelineConfig
from .grader import GroundTruthUnparsable, grade
from .pipeline import (
    IndexedCorpus,
    PipelineClients,
    generation_result_to_json,
    run_pipeline,
)

DEFAULT_EVAL_PARALLELISM = 8
MODES = ("nl", "fl")


class InsufficientCategory(ValueError):
    """A category is too small for the requested per-category sample."""

    def __init__(self, category: str, size: int, requested: int):
        super().__init__(
            f"category {category!r} has {size} questions, need {requested}"
        )
        self.category = category
        self.size = size


class ModeMismatch(ValueError):
    """The two modes' verdicts do not cover the same question set."""


@dataclass(frozen=True)
class CategoryResult:
    category: str
    attempted: int
    correct: int
    no_answer: int
    unparsed: int

    def __post_init__(self) -> None:
        if self.correct + self.no_answer + self.unparsed > self.attempted:
            raise ValueError(f"category {self.category!r}: counts exceed attempts")

    @property
    def accuracy(self) -> float:
        return self.correct / self.attempted if self.attempted else 0.0


@dataclass(frozen=True)
class EvalReport:
    nl_categories: tuple[CategoryResult, ...]
    fl_categories: tuple[CategoryResult, ...]
    nl_overall: float
    fl_overall: float
    delta_pp: float
    relative_boost_pct: float | None


@dataclass(frozen=True)
class VerdictRecord:
    """One graded pipeline run, as persisted in the trace file."""

    question_id: str
    category: str
    mode: str
    status: str
    extracted: str | None
    ground_truth: str


def sample_questions(
    questions: list[BenchmarkQuestion],
    per_category: int,
    seed: int,
) -> list[BenchmarkQuestion]:
    """Deterministically sample per_category questions from every category."""
    if per_category < 1:
        raise ValueError("per_category must be >= 1")
    groups: dict[str, list[BenchmarkQuestion]] = defaultdict(list)
    for question in questions:
        groups[question.category].append(question)
    chosen: list[BenchmarkQuestion] = []
    for category in sorted(groups):
        group = sorted(groups[category], key=lambda q: q.question_id)
        if len(group) < per_category:
            raise InsufficientCategory(category, len(group), per_category)
        # Seeding with a string keys the shuffle to (seed, category) without
        # depending on process hash randomization.
        rng = random.Random(f"{seed}:{category}")
        rng.shuffle(group)
        chosen.extend(group[:per_category])
    return sorted(chosen, key=lambda q: (q.category, q.question_id))


def verdict_record_to_json(record: VerdictRecord) -> dict:
    return {
        "question_id": record.question_id,
        "category": record.category,
        "mode": record.mode,
        "status": record.status,
        "extracted": record.extracted,
        "ground_truth": record.ground_truth,
    }


def verdict_record_from_json(obj: dict) -> VerdictRecord:
    return VerdictRecord(
        question_id=obj["question_id"],
        category=obj["category"],
        mode=obj["mode"],
        status=obj["status"],
        extracted=obj.get("extracted"),
        ground_truth=obj["ground_truth"],
    )


def read_trace(path: str | Path) -> list[VerdictRecord]:
    """Read a verdict trace; a truncated final line is dropped, not fatal."""
    records: list[VerdictRecord] = []
    path = Path(path)
    if not path.exists():
        return records
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            stripped = line.strip()
            if not stripped:
                continue
            if not line.endswith("\n"):
                break  # interrupted write; the resume pass redoes this record
            records.append(verdict_record_from_json(json.loads(stripped)))
    return records


def _rewrite_trace(path: Path, records: list[VerdictRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(verdict_record_to_json(record), ensure_ascii=False))
            fh.write("\n")


@dataclass(frozen=True)
class QuestionFailure:
    question_id: str
    mode: str
    reason: str


@dataclass
class EvalRunResult:
    records: list[VerdictRecord]
    failures: list[QuestionFailure]
    new_records: int


def run_eval(
    sample: list[BenchmarkQuestion],
    nl_corpus: IndexedCorpus,
    fl_corpus: IndexedCorpus,
    config: PipelineConfig,
    clients: PipelineClients,
    trace_path: str | Path,
    parallelism: int = DEFAULT_EVAL_PARALLELISM,
    generations_path: str | Path | None = None,
) -> EvalRunResult:
    """Run both pipelines over the sample, grade, and append to the trace.

    Work already present in the trace file is skipped, so interrupted runs
    resume without re-calling providers. Per-question failures are recorded
    and never abort the sweep (a replay miss aborts only under
    config.strict_replay).
    """
    trace_path = Path(trace_path)
    existing = read_trace(trace_path)
    _rewrite_trace(trace_path, existing)  # drop any interrupted final line
    done = {(record.question_id, record.mode) for record in existing}
    tasks = [
        (question, mode)
        for question in sample
        for mode in MODES
        if (question.question_id, mode) not in done
    ]
    configs = {mode: replace(config, mode=mode) for mode in MODES}
    corpora = {"nl": nl_corpus, "fl": fl_corpus}
    failures: list[QuestionFailure] = []

    def work(task: tuple[BenchmarkQuestion, str]):
        question, mode = task
        result = run_pipeline(question, corpora[mode], configs[mode], clients)
        try:
            verdict = grade(result.generation, question.ground_truth)
        except GroundTruthUnparsable as exc:
            return question, mode, result, None, str(exc)
        record = VerdictRecord(
            question_id=question.question_id,
            category=question.category,
            mode=mode,
            status=verdict.status,
            extracted=verdict.extracted,
            ground_truth=question.ground_truth,
        )
        return question, mode, result, record, None

    new_records: list[VerdictRecord] = []
    generations_fh = (
        open(generations_path, "a", encoding="utf-8", newline="\n")
        if generations_path is not None
        else None
    )
    try:
        with open(trace_path, "a", encoding="utf-8", newline="\n") as trace_fh:
            with ThreadPoolExecutor(max_workers=max(1, parallelism)) as executor:
                for question, mode, result, record, error in executor.map(work, tasks):
                    if error is not None:
                        failures.append(QuestionFailure(question.question_id, mode, error))
                        continue
                    if result.failure is not None:
                        failures.append(
                            QuestionFailure(question.question_id, mode, result.failure)
                        )
                    new_records.append(record)
                    trace_fh.write(
                        json.dumps(verdict_record_to_json(record), ensure_ascii=False)
                    )
                    trace_fh.write("\n")
                    trace_fh.flush()
                    if generations_fh is not None:
                        generations_fh.write(
                            json.dumps(generation_result_to_json(result), ensure_ascii=False)
                        )
                        generations_fh.write("\n")
    finally:
        if generations_fh is not None:
            generations_fh.close()
    return EvalRunResult(
        records=existing + new_records,
        failures=failures,
        new_records=len(new_records),
    )


def aggregate(records: list[VerdictRecord]) -> EvalReport:
    """Fold verdicts into per-category results and the comparison stats."""
    by_mode: dict[str, list[VerdictRecord]] = {"nl": [], "fl": []}
    for record in records:
        if record.mode not in by_mode:
            raise ValueError(f"unknown mode {record.mode!r}")
        by_mode[record.mode].append(record)
    nl_ids = {r.question_id for r in by_mode["nl"]}
    fl_ids = {r.question_id for r in by_mode["fl"]}
    if nl_ids != fl_ids:
        diff = sorted(nl_ids.symmetric_difference(fl_ids))
        raise ModeMismatch(f"modes cover different questions, e.g. {diff[:5]}")

    def categories(mode_records: list[VerdictRecord]) -> tuple[CategoryResult, ...]:
        grouped: dict[str, list[VerdictRecord]] = defaultdict(list)
        for record in mode_records:
            grouped[record.category].append(record)
        results = []
        for category in sorted(grouped):
            group = grouped[category]
            results.append(
                CategoryResult(
                    category=category,
                    attempted=len(group),
                    correct=sum(r.status == "correct" for r in group),
                    no_answer=sum(r.status == "no_answer" for r in group),
                    unparsed=sum(r.status == "unparsed" for r in group),
                )
            )
        return tuple(results)

    nl_categories = categories(by_mode["nl"])
    fl_categories = categories(by_mode["fl"])
    nl_overall = _mean([c.accuracy for c in nl_categories])
    fl_overall = _mean([c.accuracy for c in fl_categories])
    delta_pp = (fl_overall - nl_overall) * 100.0
    boost = delta_pp / (nl_overall * 100.0) * 100.0 if nl_overall > 0 else None
    return EvalReport(
        nl_categories=nl_categories,
        fl_categories=fl_categories,
        nl_overall=nl_overall,
        fl_overall=fl_overall,
        delta_pp=delta_pp,
        relative_boost_pct=boost,
    )


def _mean(values: list[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def round_half_away(value: float) -> int:
    """Round to the nearest integer, halves away from zero."""
    return int(math.copysign(math.floor(abs(value) + 0.5), value))


def render_summary(report: EvalReport) -> str:
    boost = (
        f"{round_half_away(report.relative_boost_pct)}%"
        if report.relative_boost_pct is not None
        else "n/a"
    )
    return (
        f"NL {round_half_away(report.nl_overall * 100)}% | "
        f"FL {round_half_away(report.fl_overall * 100)}% | "
        f"Δ {round_half_away(report.delta_pp)}pp | "
        f"boost {boost}"
    )


def report_to_json(report: EvalReport) -> dict:
    def category_json(result: CategoryResult) -> dict:
        return {
            "category": result.category,
            "attempted": result.attempted,
            "correct": result.correct,
            "no_answer": result.no_answer,
            "unparsed": result.unparsed,
        }

    return {
        "per_category": {
            "nl": [category_json(c) for c in report.nl_categories],
            "fl": [category_json(c) for c in report.fl_categories],
        },
        "nl_overall": report.nl_overall,
        "fl_overall": report.fl_overall,
        "delta_pp": report.delta_pp,
        "relative_boost_pct": report.relative_boost_pct,
    }


def report_from_json(obj: dict) -> EvalReport:
    def category(entry: dict) -> CategoryResult:
        return CategoryResult(
            category=entry["category"],
            attempted=entry["attempted"],
            correct=entry["correct"],
            no_answer=entry["no_answer"],
            unparsed=entry["unparsed"],
        )

    return EvalReport(
        nl_categories=tuple(category(c) for c in obj["per_category"]["nl"]),
        fl_categories=tuple(category(c) for c in obj["per_category"]["fl"]),
        nl_overall=obj["nl_overall"],
        fl_overall=obj["fl_overall"],
        delta_pp=obj["delta_pp"],
        relative_boost_pct=obj["relative_boost_pct"],
    )


def emit_report(report: EvalReport, format: str) -> bytes:
    """Render the report as machine-readable JSON or a markdown table."""
    if format == "json":
        return (json.dumps(report_to_json(report), indent=2, ensure_ascii=False) + "\n").encode(
            "utf-8"
        )
    if format != "markdown":
        raise ValueError(f"unknown report format {format!r}")
    fl_by_category = {c.category: c for c in report.fl_categories}
    lines = [
        "| category | NL acc | FL acc | Δ |",
        "| --- | --- | --- | --- |",
    ]
    for nl_cat in report.nl_categories:
        fl_cat = fl_by_category[nl_cat.category]
        delta = (fl_cat.accuracy - nl_cat.accuracy) * 100.0
        lines.append(
            f"| {nl_cat.category} "
            f"| {round_half_away(nl_cat.accuracy * 100)}% "
            f"| {round_half_away(fl_cat.accuracy * 100)}% "
            f"| {round_half_away(delta)}pp |"
        )
    lines.append("")
    lines.append(render_summary(report))
    lines.append("")
    return "\n".join(lines).encode("utf-8")
