"""Core domain types for citation-support assessment.

An answer is an ordered list of sentences, each carrying citations to
passages. A judge (human or LLM) assigns each (sentence, cited passage)
pair one of three support labels; everything downstream (scoring,
agreement analytics, annotation tooling) is built on these types.

All types here are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

#: Passage id used for the synthetic pair emitted for a zero-citation
#: sentence. Such pairs are never dispatched to a judge; they are
#: hard-labeled NO_SUPPORT.
SENTINEL_PASSAGE_ID = "NONE"

#: Upper bound on citations per answer sentence accepted at ingest.
MAX_CITATIONS_PER_SENTENCE = 20


class SupportLabel(enum.Enum):
    """Three-level support grade for one (sentence, passage) pair."""

    FULL_SUPPORT = "FULL_SUPPORT"
    PARTIAL_SUPPORT = "PARTIAL_SUPPORT"
    NO_SUPPORT = "NO_SUPPORT"


_LABEL_WEIGHTS = {
    SupportLabel.FULL_SUPPORT: 1.0,
    SupportLabel.PARTIAL_SUPPORT: 0.5,
    SupportLabel.NO_SUPPORT: 0.0,
}


def weight_of(label: SupportLabel) -> float:
    """Scalar weight of a support label: full 1.0, partial 0.5, no 0.0."""
    return _LABEL_WEIGHTS[label]


class Condition(enum.Enum):
    """How a judgment was produced."""

    FROM_SCRATCH = "FROM_SCRATCH"
    POST_EDITING = "POST_EDITING"
    AUTOMATIC = "AUTOMATIC"


@dataclass(frozen=True, slots=True)
class Passage:
    """One corpus unit: an opaque id, a title, and body text."""

    id: str
    title: str
    text: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("passage id must be non-empty")
        if not self.text:
            raise ValueError(f"passage {self.id!r}: text must be non-empty")


@dataclass(frozen=True, slots=True)
class Sentence:
    """One answer sentence with its ordered passage citations."""

    text: str
    citations: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "citations", tuple(self.citations))
        if len(self.citations) > MAX_CITATIONS_PER_SENTENCE:
            raise ValueError(
                f"sentence has {len(self.citations)} citations, "
                f"limit is {MAX_CITATIONS_PER_SENTENCE}"
            )
        if len(set(self.citations)) != len(self.citations):
            raise ValueError("duplicate citation ids within one sentence")


@dataclass(frozen=True, slots=True)
class AnswerRecord:
    """One run's answer for one topic: an ordered list of sentences.

    ``group`` and ``task`` are optional leaderboard metadata carried
    through from the run file (e.g. participating group name and a
    task tag such as RAG or AG).
    """

    topic_id: str
    run_id: str
    sentences: tuple[Sentence, ...] = ()
    group: str = ""
    task: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "sentences", tuple(self.sentences))

    @property
    def degenerate(self) -> bool:
        """True when the answer contains no sentences at all."""
        return not self.sentences


#: Identity of one judged (sentence, passage) pair.
PairKey = tuple[str, str, int, str]


@dataclass(frozen=True, slots=True)
class SupportJudgment:
    """One judge's support label for one (sentence, passage) pair.

    ``label`` is None only for an ABSTAIN outcome (the judge's response
    was unparseable after retries), in which case ``abstain_reason``
    says why. Abstains are excluded from metrics and counted separately;
    they are never coerced to NO_SUPPORT.
    """

    topic_id: str
    run_id: str
    sentence_index: int
    passage_id: str
    label: SupportLabel | None
    judge_id: str
    condition: Condition
    machine_label_shown: SupportLabel | None = None
    timestamp: str | None = None
    synthetic_zero_citation: bool = False
    abstain_reason: str | None = None

    def __post_init__(self) -> None:
        if self.sentence_index < 0:
            raise ValueError("sentence_index must be >= 0")
        if not self.passage_id:
            raise ValueError("passage_id must be non-empty")
        if self.condition is Condition.POST_EDITING and self.machine_label_shown is None:
            raise ValueError("POST_EDITING judgment must record the machine label shown")
        if self.condition is Condition.FROM_SCRATCH and self.machine_label_shown is not None:
            raise ValueError("FROM_SCRATCH judgment must not carry a machine label")
        if self.synthetic_zero_citation:
            if self.passage_id != SENTINEL_PASSAGE_ID:
                raise ValueError(
                    "synthetic zero-citation judgment must use the "
                    f"sentinel passage id {SENTINEL_PASSAGE_ID!r}"
                )
            if self.label is not SupportLabel.NO_SUPPORT:
                raise ValueError("synthetic zero-citation judgment must be NO_SUPPORT")
        if (self.label is None) != (self.abstain_reason is not None):
            raise ValueError("label is None exactly when abstain_reason is set")

    @property
    def abstained(self) -> bool:
        return self.label is None

    @property
    def pair_key(self) -> PairKey:
        return (self.topic_id, self.run_id, self.sentence_index, self.passage_id)


def first_citation_pairs(answer: AnswerRecord, k: int = 1) -> list[tuple[int, str]]:
    """Pairs to judge for one answer under the first-k-citations policy.

    For each sentence, emits its first ``min(k, citation count)``
    citations in order. A sentence with zero citations emits exactly one
    sentinel pair ``(index, SENTINEL_PASSAGE_ID)`` so downstream
    judgment sets have uniform per-sentence shape.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    pairs: list[tuple[int, str]] = []
    for i, sentence in enumerate(answer.sentences):
        if sentence.citations:
            pairs.extend((i, pid) for pid in sentence.citations[:k])
        else:
            pairs.append((i, SENTINEL_PASSAGE_ID))
    return pairs
