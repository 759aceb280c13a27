"""Judge prompt rendering, verdict parsing, and accuracy aggregation.

The judge is an external model; this module only renders its instructions,
parses its replies fail-closed (anything unparseable counts as Unclear),
and folds verdicts into per-category accuracy tables.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import PromptError, QAFormatError
from .interchange import CATEGORIES, POLARITIES, QUESTION_TYPES, QARecord

REPORT_ROW_ORDER = ("SU", "TU", "MAR", "PC", "PA", "Overall")


class Verdict(str, Enum):
    CORRECT = "Correct"
    INCORRECT = "Incorrect"
    UNCLEAR = "Unclear"


@dataclass(frozen=True, slots=True)
class JudgeRequest:
    question: str
    ground_truth: str
    answer: str

    def __post_init__(self) -> None:
        for name in ("question", "ground_truth", "answer"):
            if not getattr(self, name).strip():
                raise PromptError(f"judge request field {name!r} must be non-empty")


_JUDGE_TEMPLATE = """You are an intelligent teacher whose task is to evaluate the correctness of a model's answer to a question, given a reference ground-truth answer.

<Question> {question} </Question>
<GT> {ground_truth} </GT>
<Answer> {answer} </Answer>

If the prediction does not conflict with the ground truth, output <Eval> Correct </Eval>.
If the prediction conflicts with the ground truth, output <Eval> Incorrect </Eval>.
If the correctness of the prediction is unclear, output <Eval> Unclear </Eval>.
Reason carefully about the relationship between the prediction and the ground truth, but keep the final evaluation very brief.

Produce only one of the following tokens as the final output:
<Eval> Correct </Eval>
<Eval> Incorrect </Eval>
<Eval> Unclear </Eval>
"""


def render_judge_prompt(req: JudgeRequest) -> str:
    return _JUDGE_TEMPLATE.format(
        question=req.question,
        ground_truth=req.ground_truth,
        answer=req.answer,
    )


_EVAL_RE = re.compile(r"<eval>\s*(correct|incorrect|unclear)\s*</eval>", re.IGNORECASE)

_VERDICT_BY_WORD = {
    "correct": Verdict.CORRECT,
    "incorrect": Verdict.INCORRECT,
    "unclear": Verdict.UNCLEAR,
}


def parse_verdict(judge_output: str) -> Verdict:
    """Scan for <Eval> tokens, case-insensitive, whitespace-tolerant.

    Fail-closed: no token, or tokens that disagree, collapse to Unclear so
    malformed judge output can never inflate a score.
    """
    found = {m.lower() for m in _EVAL_RE.findall(judge_output)}
    if len(found) == 1:
        return _VERDICT_BY_WORD[found.pop()]
    return Verdict.UNCLEAR


# -- aggregation --------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class CategoryStats:
    n: int
    correct: int
    unclear: int
    accuracy: float
    unclear_rate: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "correct": self.correct,
            "unclear": self.unclear,
            "accuracy": self.accuracy,
            "unclear_rate": self.unclear_rate,
        }


@dataclass(frozen=True, slots=True)
class CategoryReport:
    per_category: dict[str, CategoryStats]
    overall: CategoryStats
    unclear_excluded: bool

    def to_dict(self) -> dict:
        return {
            "categories": {c: self.per_category[c].to_dict() for c in CATEGORIES},
            "overall": self.overall.to_dict(),
            "unclear_excluded_from_denominator": self.unclear_excluded,
        }


def _pct(numerator: int, denominator: int) -> float:
    if denominator == 0:
        return 0.0
    return round(100.0 * numerator / denominator, 2)


def _stats(pairs: Sequence[tuple[QARecord, Verdict]], unclear_excluded: bool) -> CategoryStats:
    n = len(pairs)
    correct = sum(1 for _, v in pairs if v is Verdict.CORRECT)
    unclear = sum(1 for _, v in pairs if v is Verdict.UNCLEAR)
    denom = n - unclear if unclear_excluded else n
    return CategoryStats(
        n=n,
        correct=correct,
        unclear=unclear,
        accuracy=_pct(correct, denom),
        unclear_rate=_pct(unclear, n),
    )


def aggregate(
    records: Iterable[tuple[QARecord, Verdict]],
    unclear_excluded: bool = False,
) -> CategoryReport:
    """Per-category and pooled accuracy over (record, verdict) pairs.

    Only Correct counts toward accuracy. By default Unclear stays in the
    denominator (counts against accuracy); ``unclear_excluded=True``
    switches to the drop-unclear convention.
    """
    pairs = list(records)
    by_category: dict[str, list[tuple[QARecord, Verdict]]] = {c: [] for c in CATEGORIES}
    for record, verdict in pairs:
        by_category[record.category].append((record, verdict))
    return CategoryReport(
        per_category={c: _stats(group, unclear_excluded) for c, group in by_category.items()},
        overall=_stats(pairs, unclear_excluded),
        unclear_excluded=unclear_excluded,
    )


def merge_reports(a: CategoryReport, b: CategoryReport) -> CategoryReport:
    """Merge two partial reports by summing their counts (monoid fold)."""
    if a.unclear_excluded != b.unclear_excluded:
        raise ValueError("cannot merge reports with different unclear conventions")

    def merged(x: CategoryStats, y: CategoryStats) -> CategoryStats:
        n = x.n + y.n
        correct = x.correct + y.correct
        unclear = x.unclear + y.unclear
        denom = n - unclear if a.unclear_excluded else n
        return CategoryStats(
            n=n, correct=correct, unclear=unclear,
            accuracy=_pct(correct, denom), unclear_rate=_pct(unclear, n),
        )

    return CategoryReport(
        per_category={c: merged(a.per_category[c], b.per_category[c]) for c in CATEGORIES},
        overall=merged(a.overall, b.overall),
        unclear_excluded=a.unclear_excluded,
    )


def render_report_md(report: CategoryReport) -> str:
    """Markdown table mirroring the benchmark's row order."""
    lines = [
        "| Category | N | Correct | Unclear | Accuracy (%) | Unclear rate (%) |",
        "|----------|---|---------|---------|--------------|------------------|",
    ]
    for name in REPORT_ROW_ORDER:
        stats = report.overall if name == "Overall" else report.per_category[name]
        lines.append(
            f"| {name} | {stats.n} | {stats.correct} | {stats.unclear} "
            f"| {stats.accuracy:.2f} | {stats.unclear_rate:.2f} |"
        )
    return "".join(line + "\n" for line in lines)


# -- judge request / response files ---------------------------------------------


def write_judge_requests(
    path: str | Path,
    records: Sequence[QARecord],
    answers_by_id: Mapping[str, str],
) -> list[str]:
    """Render one judge request per record with a model answer on file.

    Returns the ids of records with no answer (skipped, reported upstream).
    """
    missing: list[str] = []
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            answer = answers_by_id.get(rec.id)
            if answer is None or not answer.strip():
                missing.append(rec.id)
                continue
            prompt = render_judge_prompt(JudgeRequest(
                question=rec.question,
                ground_truth=rec.ground_truth,
                answer=answer,
            ))
            fh.write(json.dumps({"id": rec.id, "prompt": prompt}, ensure_ascii=False) + "\n")
    return missing


def read_response_file(path: str | Path) -> dict[str, str]:
    """Read ``{"id", "text"}`` JSON lines; duplicate ids are an error."""
    path = Path(path)
    if not path.is_file():
        raise QAFormatError(f"response file not found: {path}")
    out: dict[str, str] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise QAFormatError(f"malformed JSON: {exc}", line=lineno) from exc
            if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
                raise QAFormatError("response must be an object with id and text", line=lineno)
            rid = str(obj["id"])
            if rid in out:
                raise QAFormatError(f"duplicate response id {rid!r}", line=lineno)
            out[rid] = str(obj["text"])
    return out


def verdicts_for_records(
    records: Sequence[QARecord],
    judge_responses: Mapping[str, str],
) -> tuple[list[tuple[QARecord, Verdict]], list[str]]:
    """Pair every record with its parsed verdict; missing replies go Unclear."""
    pairs: list[tuple[QARecord, Verdict]] = []
    missing: list[str] = []
    for rec in records:
        text = judge_responses.get(rec.id)
        if text is None:
            missing.append(rec.id)
            pairs.append((rec, Verdict.UNCLEAR))
        else:
            pairs.append((rec, parse_verdict(text)))
    return pairs, missing


# -- dataset statistics --------------------------------------------------------


def dataset_stats(records: Sequence[QARecord]) -> dict:
    """Counts and percentages by category, question type, and polarity.

    Percentages are over the actual record count, which is reported
    explicitly as ``percent_base``; nothing is reconciled or rescaled. An
    empty input renders percentages as 0.00 and sets the n=0 flag.
    """
    total = len(records)
    category = Counter(r.category for r in records)
    qtype = Counter(r.question_type for r in records)
    polarity = Counter(r.polarity for r in records)

    def table(counter: Counter, keys: tuple[str, ...]) -> dict:
        return {
            key: {"count": counter.get(key, 0), "percent": _pct(counter.get(key, 0), total)}
            for key in keys
        }

    return {
        "total": total,
        "percent_base": total,
        "empty": total == 0,
        "category": table(category, CATEGORIES),
        "question_type": table(qtype, QUESTION_TYPES),
        "polarity": table(polarity, POLARITIES),
    }


def render_stats_text(stats: dict) -> str:
    """Plain-text rendering of the stats table with the base stated up front."""
    lines = [f"records: {stats['total']} (percent base: {stats['percent_base']})"]
    if stats["empty"]:
        lines.append("note: no records; percentages are undefined and rendered as 0.00")
    for section in ("category", "question_type", "polarity"):
        lines.append(f"{section}:")
        for key, cell in stats[section].items():
            lines.append(f"  {key}: {cell['count']} ({cell['percent']:.2f}%)")
    return "".join(line + "\n" for line in lines)
