"""Support assessment for retrieval-augmented generation answers."""

from .model import (
    MAX_CITATIONS_PER_SENTENCE,
    SENTINEL_PASSAGE_ID,
    AnswerRecord,
    Condition,
    PairKey,
    Passage,
    Sentence,
    SupportJudgment,
    SupportLabel,
    first_citation_pairs,
    weight_of,
)

__version__ = "0.1.0"

__all__ = [
    "MAX_CITATIONS_PER_SENTENCE",
    "SENTINEL_PASSAGE_ID",
    "AnswerRecord",
    "Condition",
    "PairKey",
    "Passage",
    "Sentence",
    "SupportJudgment",
    "SupportLabel",
    "first_citation_pairs",
    "weight_of",
    "__version__",
]
