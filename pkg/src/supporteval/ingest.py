"""Parsing, validation, and serialization of evaluation files.

All record files are line-delimited JSON (UTF-8) whose first line is a
header record carrying the schema name and version; topics are a plain
two-column TSV. Invalid run records are quarantined with a
machine-readable reason code, never silently dropped: every input line
is either accepted or appears in the validation report.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator

from .corpus import PassageChunk, DedupRemoval, split_sentences
from .model import (
    MAX_CITATIONS_PER_SENTENCE,
    AnswerRecord,
    Condition,
    Passage,
    Sentence,
    SupportJudgment,
    SupportLabel,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

#: Wire value for an abstained judgment's label field.
ABSTAIN_LABEL = "ABSTAIN"


class IngestError(ValueError):
    """A file could not be parsed; the message names the location."""


@dataclass(frozen=True, slots=True)
class Topic:
    topic_id: str
    query: str

    def __post_init__(self) -> None:
        if not self.topic_id:
            raise ValueError("topic_id must be non-empty")
        if not self.query:
            raise ValueError(f"topic {self.topic_id!r}: query must be non-empty")


@dataclass(frozen=True, slots=True)
class ValidationIssue:
    location: str
    reason_code: str
    detail: str


@dataclass(slots=True)
class ValidationReport:
    """Counts plus one issue per rejected or suspicious input record."""

    issues: list[ValidationIssue] = field(default_factory=list)
    sentence_count: int = 0
    zero_citation_count: int = 0
    unresolved_citation_count: int = 0
    quarantined_count: int = 0

    def add(self, location: str, reason_code: str, detail: str) -> None:
        self.issues.append(ValidationIssue(location, reason_code, detail))


@dataclass(frozen=True, slots=True)
class Dataset:
    """Everything one evaluation needs: topics, passages, validated runs."""

    topics: dict[str, Topic]
    passages: dict[str, Passage]
    runs: tuple[AnswerRecord, ...]

    def answers_for_run(self, run_id: str) -> list[AnswerRecord]:
        return [a for a in self.runs if a.run_id == run_id]


# ---------------------------------------------------------------------------
# Record-file plumbing


def _write_jsonl(out: IO[str], kind: str, records: Iterable[dict]) -> None:
    header = {"schema": kind, "schema_version": SCHEMA_VERSION}
    out.write(json.dumps(header, sort_keys=True, ensure_ascii=False) + "\n")
    for record in records:
        out.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")


def write_jsonl_file(path: str | Path, kind: str, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as out:
        _write_jsonl(out, kind, records)


def _read_jsonl(path: str | Path, kind: str) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, record) for each data line, checking the header."""
    path = Path(path)
    if not path.exists():
        raise IngestError(f"{path}: file does not exist")
    with open(path, encoding="utf-8") as handle:
        first = handle.readline()
        if not first.strip():
            logger.warning("%s: empty file", path)
            return
        header = _parse_line(path, 1, first)
        if header.get("schema") != kind:
            raise IngestError(
                f"{path}:1: expected schema {kind!r}, found {header.get('schema')!r}"
            )
        if header.get("schema_version") != SCHEMA_VERSION:
            raise IngestError(
                f"{path}:1: unsupported schema_version {header.get('schema_version')!r}"
            )
        for lineno, line in enumerate(handle, start=2):
            if not line.strip():
                continue
            yield lineno, _parse_line(path, lineno, line)


def _parse_line(path: Path, lineno: int, line: str) -> dict:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise IngestError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(record, dict):
        raise IngestError(f"{path}:{lineno}: record must be a JSON object")
    return record


def _require(record: dict, key: str, path: Path, lineno: int, kind: type = str):
    if key not in record:
        raise IngestError(f"{path}:{lineno}: missing field {key!r}")
    value = record[key]
    if kind is int and isinstance(value, bool) or not isinstance(value, kind):
        raise IngestError(
            f"{path}:{lineno}: field {key!r} must be {kind.__name__}"
        )
    return value


# ---------------------------------------------------------------------------
# Topics


def load_topics(path: str | Path) -> dict[str, Topic]:
    """Load a two-column TSV of ``topic_id<TAB>query``."""
    path = Path(path)
    if not path.exists():
        raise IngestError(f"{path}: file does not exist")
    topics: dict[str, Topic] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if lineno == 1 and line.split("\t")[0] == "topic_id":
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2 or not parts[0] or not parts[1].strip():
                raise IngestError(f"{path}:{lineno}: expected topic_id<TAB>query")
            topic_id, query = parts[0], parts[1].strip()
            if topic_id in topics:
                raise IngestError(f"{path}:{lineno}: duplicate topic_id {topic_id!r}")
            topics[topic_id] = Topic(topic_id, query)
    return topics


def write_topics(path: str | Path, topics: Iterable[Topic]) -> None:
    with open(path, "w", encoding="utf-8") as out:
        out.write("topic_id\tquery\n")
        for topic in topics:
            out.write(f"{topic.topic_id}\t{topic.query}\n")


# ---------------------------------------------------------------------------
# Passages


def load_passages(path: str | Path) -> dict[str, Passage]:
    """Load a passage file into an id-keyed store.

    Rejects duplicate ids, naming both offending lines. Extra
    provenance fields (docid, sentence span) are tolerated and ignored.
    """
    store: dict[str, Passage] = {}
    seen_lines: dict[str, int] = {}
    path = Path(path)
    for lineno, record in _read_jsonl(path, "passages"):
        pid = _require(record, "id", path, lineno)
        if pid in store:
            raise IngestError(
                f"{path}:{lineno}: duplicate passage id {pid!r} "
                f"(first seen on line {seen_lines[pid]})"
            )
        try:
            store[pid] = Passage(
                id=pid,
                title=record.get("title", ""),
                text=_require(record, "text", path, lineno),
            )
        except ValueError as exc:
            raise IngestError(f"{path}:{lineno}: {exc}") from None
        seen_lines[pid] = lineno
    return store


def passage_chunk_record(chunk: PassageChunk) -> dict:
    return {
        "id": chunk.id,
        "title": chunk.title,
        "text": chunk.text,
        "docid": chunk.doc_id,
        "start_sentence": chunk.start_sentence,
        "end_sentence": chunk.end_sentence,
    }


def write_passages(path: str | Path, chunks: Iterable[PassageChunk]) -> None:
    write_jsonl_file(path, "passages", (passage_chunk_record(c) for c in chunks))


def write_dedup_report(path: str | Path, removals: Iterable[DedupRemoval]) -> None:
    write_jsonl_file(
        path,
        "dedup_report",
        (
            {
                "removed_id": r.removed_id,
                "kept_id": r.kept_id,
                "estimated_jaccard": r.estimated_jaccard,
            }
            for r in removals
        ),
    )


# ---------------------------------------------------------------------------
# Raw documents


def load_documents(path: str | Path):
    """Load raw documents ({docid, title, body} records) for corpus prep."""
    from .corpus import RawDocument

    docs = []
    seen: dict[str, int] = {}
    path = Path(path)
    for lineno, record in _read_jsonl(path, "documents"):
        doc_id = _require(record, "docid", path, lineno)
        if doc_id in seen:
            raise IngestError(
                f"{path}:{lineno}: duplicate docid {doc_id!r} "
                f"(first seen on line {seen[doc_id]})"
            )
        seen[doc_id] = lineno
        try:
            docs.append(
                RawDocument(
                    doc_id=doc_id,
                    title=record.get("title", ""),
                    body=_require(record, "body", path, lineno),
                )
            )
        except ValueError as exc:
            raise IngestError(f"{path}:{lineno}: {exc}") from None
    return docs


def write_documents(path: str | Path, docs) -> None:
    write_jsonl_file(
        path,
        "documents",
        ({"docid": d.doc_id, "title": d.title, "body": d.body} for d in docs),
    )


# ---------------------------------------------------------------------------
# Runs


def load_run(
    path: str | Path,
    passage_store: dict[str, Passage],
    resegment_free_text: bool = False,
) -> tuple[list[AnswerRecord], ValidationReport]:
    """Load and validate one run file of answer records.

    Records that violate a semantic constraint (citation limit,
    duplicate citations, unresolved citation ids, duplicate
    topic/run keys) are quarantined into the report; syntactically
    invalid lines raise. When ``resegment_free_text`` is set, records
    carrying a free-text ``answer`` instead of ``sentences`` are split
    with the corpus sentence splitter (citations empty); otherwise such
    records are quarantined.
    """
    path = Path(path)
    report = ValidationReport()
    answers: list[AnswerRecord] = []
    seen_keys: dict[tuple[str, str], int] = {}

    for lineno, record in _read_jsonl(path, "runs"):
        location = f"{path}:{lineno}"
        topic_id = _require(record, "topic_id", path, lineno)
        run_id = _require(record, "run_id", path, lineno)
        key = (topic_id, run_id)
        if key in seen_keys:
            report.add(
                location,
                "duplicate_answer",
                f"(topic {topic_id!r}, run {run_id!r}) already seen on line {seen_keys[key]}",
            )
            report.quarantined_count += 1
            continue
        seen_keys[key] = lineno

        if "sentences" not in record and "answer" in record:
            if not resegment_free_text:
                report.add(location, "unsegmented_answer", "record carries free text, not sentences")
                report.quarantined_count += 1
                continue
            record = dict(record)
            record["sentences"] = [
                {"text": s, "citations": []}
                for s in split_sentences(_require(record, "answer", path, lineno))
            ]

        raw_sentences = _require(record, "sentences", path, lineno, list)
        sentences: list[Sentence] = []
        problem: tuple[str, str] | None = None
        for i, raw in enumerate(raw_sentences):
            if not isinstance(raw, dict) or "text" not in raw:
                raise IngestError(f"{location}: sentence {i} must be an object with text")
            citations = raw.get("citations", [])
            if not isinstance(citations, list) or not all(isinstance(c, str) for c in citations):
                raise IngestError(f"{location}: sentence {i} citations must be a list of ids")
            if len(citations) > MAX_CITATIONS_PER_SENTENCE:
                problem = (
                    "citation_limit",
                    f"sentence {i} has {len(citations)} citations (limit {MAX_CITATIONS_PER_SENTENCE})",
                )
                break
            if len(set(citations)) != len(citations):
                problem = ("duplicate_citation", f"sentence {i} repeats a citation id")
                break
            unresolved = [c for c in citations if c not in passage_store]
            if unresolved:
                report.unresolved_citation_count += len(unresolved)
                problem = (
                    "unresolved_citation",
                    f"sentence {i} cites unknown passages {unresolved}",
                )
                break
            sentences.append(Sentence(text=raw["text"], citations=tuple(citations)))

        if problem is not None:
            report.add(location, problem[0], problem[1])
            report.quarantined_count += 1
            continue

        answer = AnswerRecord(
            topic_id=topic_id,
            run_id=run_id,
            sentences=tuple(sentences),
            group=record.get("group", ""),
            task=record.get("task", ""),
        )
        report.sentence_count += len(sentences)
        report.zero_citation_count += sum(1 for s in sentences if not s.citations)
        answers.append(answer)

    return answers, report


def answer_record(answer: AnswerRecord) -> dict:
    record = {
        "topic_id": answer.topic_id,
        "run_id": answer.run_id,
        "sentences": [
            {"text": s.text, "citations": list(s.citations)} for s in answer.sentences
        ],
    }
    if answer.group:
        record["group"] = answer.group
    if answer.task:
        record["task"] = answer.task
    return record


def write_runs(path: str | Path, answers: Iterable[AnswerRecord]) -> None:
    write_jsonl_file(path, "runs", (answer_record(a) for a in answers))


# ---------------------------------------------------------------------------
# Judgments


def judgment_record(judgment: SupportJudgment) -> dict:
    record = {
        "topic_id": judgment.topic_id,
        "run_id": judgment.run_id,
        "sentence_index": judgment.sentence_index,
        "passage_id": judgment.passage_id,
        "label": ABSTAIN_LABEL if judgment.label is None else judgment.label.value,
        "judge_id": judgment.judge_id,
        "condition": judgment.condition.value,
        "synthetic_zero_citation": judgment.synthetic_zero_citation,
    }
    if judgment.machine_label_shown is not None:
        record["machine_label_shown"] = judgment.machine_label_shown.value
    if judgment.timestamp is not None:
        record["timestamp"] = judgment.timestamp
    if judgment.abstain_reason is not None:
        record["abstain_reason"] = judgment.abstain_reason
    return record


def _parse_label_field(value: str, path: Path, lineno: int) -> SupportLabel | None:
    if value == ABSTAIN_LABEL:
        return None
    try:
        return SupportLabel(value)
    except ValueError:
        raise IngestError(f"{path}:{lineno}: unknown label {value!r}") from None


def judgment_from_record(record: dict, path: Path = Path("<memory>"), lineno: int = 0) -> SupportJudgment:
    label = _parse_label_field(_require(record, "label", path, lineno), path, lineno)
    machine_shown = record.get("machine_label_shown")
    condition_value = _require(record, "condition", path, lineno)
    try:
        condition = Condition(condition_value)
    except ValueError:
        raise IngestError(f"{path}:{lineno}: unknown condition {condition_value!r}") from None
    abstain_reason = record.get("abstain_reason")
    if label is None and abstain_reason is None:
        abstain_reason = "unspecified"
    try:
        return SupportJudgment(
            topic_id=_require(record, "topic_id", path, lineno),
            run_id=_require(record, "run_id", path, lineno),
            sentence_index=_require(record, "sentence_index", path, lineno, int),
            passage_id=_require(record, "passage_id", path, lineno),
            label=label,
            judge_id=_require(record, "judge_id", path, lineno),
            condition=condition,
            machine_label_shown=(
                _parse_label_field(machine_shown, path, lineno) if machine_shown else None
            ),
            timestamp=record.get("timestamp"),
            synthetic_zero_citation=record.get("synthetic_zero_citation", False),
            abstain_reason=abstain_reason,
        )
    except ValueError as exc:
        raise IngestError(f"{path}:{lineno}: {exc}") from None


def load_judgments(path: str | Path) -> list[SupportJudgment]:
    """Load a judgment file, enforcing every SupportJudgment invariant."""
    path = Path(path)
    return [judgment_from_record(record, path, lineno) for lineno, record in _read_jsonl(path, "judgments")]


def write_judgments(path: str | Path, judgments: Iterable[SupportJudgment]) -> None:
    write_jsonl_file(path, "judgments", (judgment_record(j) for j in judgments))


def write_validation_report(path: str | Path, report: ValidationReport) -> None:
    records = [
        {
            "location": issue.location,
            "reason_code": issue.reason_code,
            "detail": issue.detail,
        }
        for issue in report.issues
    ]
    records.append(
        {
            "location": "<summary>",
            "reason_code": "summary",
            "detail": json.dumps(
                {
                    "sentence_count": report.sentence_count,
                    "zero_citation_count": report.zero_citation_count,
                    "unresolved_citation_count": report.unresolved_citation_count,
                    "quarantined_count": report.quarantined_count,
                },
                sort_keys=True,
            ),
        }
    )
    write_jsonl_file(path, "validation_report", records)


# ---------------------------------------------------------------------------
# Dataset assembly


def load_dataset(
    topics_path: str | Path,
    passages_path: str | Path,
    run_paths: Iterable[str | Path],
) -> tuple[Dataset, ValidationReport]:
    """Load topics, passages, and runs; merge per-file validation reports."""
    topics = load_topics(topics_path)
    passages = load_passages(passages_path)
    merged = ValidationReport()
    runs: list[AnswerRecord] = []
    seen: dict[tuple[str, str], str] = {}
    for run_path in run_paths:
        answers, report = load_run(run_path, passages)
        merged.issues.extend(report.issues)
        merged.sentence_count += report.sentence_count
        merged.zero_citation_count += report.zero_citation_count
        merged.unresolved_citation_count += report.unresolved_citation_count
        merged.quarantined_count += report.quarantined_count
        for answer in answers:
            key = (answer.topic_id, answer.run_id)
            if key in seen:
                merged.add(
                    str(run_path),
                    "duplicate_answer",
                    f"(topic {key[0]!r}, run {key[1]!r}) already loaded from {seen[key]}",
                )
                merged.quarantined_count += 1
                continue
            if answer.topic_id not in topics:
                merged.add(
                    str(run_path),
                    "unknown_topic",
                    f"run {answer.run_id!r} answers unknown topic {answer.topic_id!r}",
                )
                merged.quarantined_count += 1
                continue
            seen[key] = str(run_path)
            runs.append(answer)
    dataset = Dataset(topics=topics, passages=passages, runs=tuple(runs))
    return dataset, merged
