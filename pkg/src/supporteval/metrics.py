"""Weighted precision and recall over support judgments.

Precision is the mean support weight over judged (sentence, citation)
pairs and penalizes overcitation; recall divides the same credit by
the total sentence count and penalizes uncited sentences. With one
judged citation per sentence the two are identical whenever every
sentence carries a citation.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .ingest import Dataset
from .model import (
    SENTINEL_PASSAGE_ID,
    AnswerRecord,
    SupportJudgment,
    first_citation_pairs,
    weight_of,
)


class ScoringError(ValueError):
    """Judgments do not line up with the answer's expected pair set."""


@dataclass(frozen=True, slots=True)
class SupportScores:
    """Support scores and bookkeeping for one answer (or aggregate)."""

    weighted_precision: float
    weighted_recall: float
    judged_pair_count: int
    sentence_count: int
    zero_citation_count: int
    abstain_count: int
    degenerate: bool

    @property
    def all_uncited(self) -> bool:
        """True when the answer has sentences but judged no citation at all."""
        return self.sentence_count > 0 and self.judged_pair_count == 0


@dataclass(frozen=True, slots=True)
class RunReport:
    """Per-run macro-averages over the topics judged for that run."""

    run_id: str
    group: str
    task: str
    weighted_precision: float
    weighted_recall: float
    mean_sentences: float
    topic_count: int


def score_answer(
    answer: AnswerRecord,
    judgments: Sequence[SupportJudgment],
    k: int = 1,
) -> SupportScores:
    """Score one answer against its judgments.

    The judgments must cover exactly the pairs from
    ``first_citation_pairs(answer, k)`` (zero-citation sentences as
    synthetic NO_SUPPORT); any mismatch raises with the missing and
    extra pairs. Abstained judgments are excluded from both numerators
    and denominators. A sentence's recall credit is the best weight
    among its judged citations.
    """
    if answer.degenerate:
        if judgments:
            raise ScoringError(
                f"degenerate answer (topic={answer.topic_id}, run={answer.run_id}) "
                f"has {len(judgments)} judgments; expected none"
            )
        return SupportScores(0.0, 0.0, 0, 0, 0, 0, degenerate=True)

    for judgment in judgments:
        if (judgment.topic_id, judgment.run_id) != (answer.topic_id, answer.run_id):
            raise ScoringError(
                f"judgment for (topic={judgment.topic_id}, run={judgment.run_id}) "
                f"does not belong to (topic={answer.topic_id}, run={answer.run_id})"
            )

    expected = set(first_citation_pairs(answer, k))
    provided: dict[tuple[int, str], SupportJudgment] = {}
    for judgment in judgments:
        pair = (judgment.sentence_index, judgment.passage_id)
        if pair in provided:
            raise ScoringError(f"duplicate judgment for pair {pair}")
        provided[pair] = judgment
    missing = sorted(expected - provided.keys())
    extra = sorted(provided.keys() - expected)
    if missing or extra:
        raise ScoringError(
            f"judgment set mismatch for (topic={answer.topic_id}, run={answer.run_id}): "
            f"missing={missing} extra={extra}"
        )

    scored_weights: list[float] = []
    abstain_count = 0
    best_by_sentence: dict[int, float | None] = {}
    for (index, pid), judgment in provided.items():
        if judgment.abstained:
            abstain_count += 1
            best_by_sentence.setdefault(index, None)
            continue
        weight = weight_of(judgment.label)
        if pid != SENTINEL_PASSAGE_ID:
            scored_weights.append(weight)
        best = best_by_sentence.get(index)
        best_by_sentence[index] = weight if best is None else max(best, weight)

    sentence_count = len(answer.sentences)
    zero_citation_count = sum(1 for s in answer.sentences if not s.citations)
    credited = [w for w in best_by_sentence.values() if w is not None]
    abstained_sentences = sum(1 for w in best_by_sentence.values() if w is None)

    precision = sum(scored_weights) / len(scored_weights) if scored_weights else 0.0
    recall_denominator = sentence_count - abstained_sentences
    recall = sum(credited) / recall_denominator if recall_denominator > 0 else 0.0

    return SupportScores(
        weighted_precision=precision,
        weighted_recall=recall,
        judged_pair_count=len(scored_weights),
        sentence_count=sentence_count,
        zero_citation_count=zero_citation_count,
        abstain_count=abstain_count,
        degenerate=False,
    )


def group_judgments_by_answer(
    judgments: Iterable[SupportJudgment],
) -> dict[tuple[str, str], list[SupportJudgment]]:
    grouped: dict[tuple[str, str], list[SupportJudgment]] = {}
    for judgment in judgments:
        grouped.setdefault((judgment.topic_id, judgment.run_id), []).append(judgment)
    return grouped


def score_run(
    run_id: str,
    dataset: Dataset,
    judgments: Iterable[SupportJudgment],
    k: int = 1,
) -> RunReport:
    """Macro-average one run's answer scores over its judged topics."""
    grouped = group_judgments_by_answer(judgments)
    answers = {a.topic_id: a for a in dataset.answers_for_run(run_id)}
    if not answers:
        raise ScoringError(f"run {run_id!r} has no answers in the dataset")

    topic_scores: dict[str, SupportScores] = {}
    for topic_id in sorted(answers):
        answer_judgments = grouped.get((topic_id, run_id))
        if answer_judgments is None:
            continue
        topic_scores[topic_id] = score_answer(answers[topic_id], answer_judgments, k)
    if not topic_scores:
        raise ScoringError(f"run {run_id!r} has no judged topics")

    scores = list(topic_scores.values())
    sample = next(iter(answers.values()))
    return RunReport(
        run_id=run_id,
        group=sample.group,
        task=sample.task,
        weighted_precision=sum(s.weighted_precision for s in scores) / len(scores),
        weighted_recall=sum(s.weighted_recall for s in scores) / len(scores),
        mean_sentences=sum(
            len(answers[t].sentences) for t in topic_scores
        ) / len(scores),
        topic_count=len(scores),
    )


def leaderboard(reports: Iterable[RunReport]) -> list[RunReport]:
    """Order run reports: precision desc, recall desc, run_id asc."""
    return sorted(
        reports,
        key=lambda r: (-r.weighted_precision, -r.weighted_recall, r.run_id),
    )


def format_leaderboard(reports: Sequence[RunReport]) -> str:
    """Leaderboard as TSV: run, group, task, precision, recall, sentences."""
    out = io.StringIO()
    out.write("run_id\tgroup\ttask\tweighted_precision\tweighted_recall\tmean_sentences\n")
    for report in leaderboard(reports):
        out.write(
            f"{report.run_id}\t{report.group}\t{report.task}\t"
            f"{report.weighted_precision:.4f}\t{report.weighted_recall:.4f}\t"
            f"{report.mean_sentences:.2f}\n"
        )
    return out.getvalue()


def write_leaderboard(path: str | Path, reports: Sequence[RunReport]) -> None:
    Path(path).write_text(format_leaderboard(reports), encoding="utf-8")


def run_scores_by_judge(
    dataset: Dataset,
    judgments: Iterable[SupportJudgment],
    k: int = 1,
) -> dict[str, Mapping[str, float]]:
    """Per-run mean weighted precision and recall for one judgment set.

    Returns {run_id: {"weighted_precision": p, "weighted_recall": r}}
    over runs with at least one fully judged topic; used for
    judge-vs-judge rank correlation.
    """
    run_ids = sorted({a.run_id for a in dataset.runs})
    out: dict[str, Mapping[str, float]] = {}
    judgment_list = list(judgments)
    for run_id in run_ids:
        try:
            report = score_run(run_id, dataset, judgment_list, k)
        except ScoringError:
            continue
        out[run_id] = {
            "weighted_precision": report.weighted_precision,
            "weighted_recall": report.weighted_recall,
        }
    return out
