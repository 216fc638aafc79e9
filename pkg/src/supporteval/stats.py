"""Judge-agreement analytics.

Two judgment sets are compared on the intersection of their pair keys
(topic, run, sentence index, passage id); keys seen by only one judge
are reported, never silently counted. Kappa and tau are computed from
their definitions so results are reproducible to the last bit.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .model import PairKey, SupportJudgment, SupportLabel

#: Fixed axis order for confusion matrices and distributions.
LABEL_ORDER = (
    SupportLabel.FULL_SUPPORT,
    SupportLabel.PARTIAL_SUPPORT,
    SupportLabel.NO_SUPPORT,
)

_LABEL_INDEX = {label: i for i, label in enumerate(LABEL_ORDER)}


class StatsError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class ConfusionMatrix3:
    """3x3 label confusion counts, rows = judge A, columns = judge B."""

    counts: tuple[tuple[int, int, int], ...]
    total: int

    def __post_init__(self) -> None:
        if sum(sum(row) for row in self.counts) != self.total:
            raise ValueError("total must equal the sum of all cells")

    @property
    def trace(self) -> int:
        return sum(self.counts[i][i] for i in range(3))

    def percentages(self) -> tuple[tuple[float, float, float], ...]:
        if self.total == 0:
            raise StatsError("cannot take percentages of an empty matrix")
        return tuple(
            tuple(cell / self.total * 100.0 for cell in row) for row in self.counts
        )

    def transpose(self) -> "ConfusionMatrix3":
        return ConfusionMatrix3(
            counts=tuple(
                tuple(self.counts[j][i] for j in range(3)) for i in range(3)
            ),
            total=self.total,
        )


@dataclass(frozen=True, slots=True)
class AgreementReport:
    """Pairwise agreement between two judges over shared pair keys."""

    matrix: ConfusionMatrix3
    exact_agreement_rate: float
    kappa: float
    pair_count: int
    only_in_a: int
    only_in_b: int
    abstained_a: int
    abstained_b: int


def _labeled_by_key(judgments: Iterable[SupportJudgment], side: str) -> tuple[dict[PairKey, SupportLabel], int]:
    by_key: dict[PairKey, SupportLabel] = {}
    abstained = 0
    for judgment in judgments:
        if judgment.abstained:
            abstained += 1
            continue
        key = judgment.pair_key
        if key in by_key:
            raise StatsError(f"duplicate pair key in judgment set {side}: {key}")
        by_key[key] = judgment.label
    return by_key, abstained


def label_pairs(
    judgments_a: Iterable[SupportJudgment],
    judgments_b: Iterable[SupportJudgment],
) -> list[tuple[SupportLabel, SupportLabel]]:
    """Aligned (label A, label B) pairs over the shared keys."""
    a, _ = _labeled_by_key(judgments_a, "A")
    b, _ = _labeled_by_key(judgments_b, "B")
    return [(a[key], b[key]) for key in sorted(a.keys() & b.keys())]


def confusion(
    judgments_a: Iterable[SupportJudgment],
    judgments_b: Iterable[SupportJudgment],
) -> ConfusionMatrix3:
    """Confusion matrix over the keys both judges labeled."""
    return confusion_from_pairs(label_pairs(judgments_a, judgments_b))


def confusion_from_pairs(
    pairs: Sequence[tuple[SupportLabel, SupportLabel]],
) -> ConfusionMatrix3:
    grid = [[0, 0, 0], [0, 0, 0], [0, 0, 0]]
    for label_a, label_b in pairs:
        grid[_LABEL_INDEX[label_a]][_LABEL_INDEX[label_b]] += 1
    return ConfusionMatrix3(
        counts=tuple(tuple(row) for row in grid),
        total=len(pairs),
    )


def exact_agreement(matrix: ConfusionMatrix3) -> float:
    """Fraction of pairs on which the judges agree exactly."""
    if matrix.total == 0:
        raise StatsError("exact agreement is undefined for zero pairs")
    return matrix.trace / matrix.total


def kappa_from_matrix(matrix: ConfusionMatrix3, weights: str | None = None) -> float:
    """Cohen's kappa from a confusion matrix.

    ``weights=None`` is the unweighted statistic; ``weights="linear"``
    penalizes disagreements by ordinal distance on the support scale.
    Returns NaN when chance agreement is 1 but observed is not.
    """
    if matrix.total == 0:
        raise StatsError("kappa is undefined for zero pairs")
    n = matrix.total
    marginal_a = [sum(matrix.counts[i][j] for j in range(3)) / n for i in range(3)]
    marginal_b = [sum(matrix.counts[i][j] for i in range(3)) / n for j in range(3)]
    if weights is None:
        observed = matrix.trace / n
        expected = sum(marginal_a[i] * marginal_b[i] for i in range(3))
        if expected == 1.0:
            return 1.0 if observed == 1.0 else float("nan")
        return (observed - expected) / (1.0 - expected)
    if weights != "linear":
        raise ValueError(f"unknown kappa weighting {weights!r}")
    disagreement = sum(
        abs(i - j) * matrix.counts[i][j] / n for i in range(3) for j in range(3)
    )
    expected_disagreement = sum(
        abs(i - j) * marginal_a[i] * marginal_b[j] for i in range(3) for j in range(3)
    )
    if expected_disagreement == 0.0:
        return 1.0 if disagreement == 0.0 else float("nan")
    return 1.0 - disagreement / expected_disagreement


def cohens_kappa(
    judgments_a: Iterable[SupportJudgment],
    judgments_b: Iterable[SupportJudgment],
    weights: str | None = None,
) -> float:
    """Chance-corrected agreement between two judges on shared keys."""
    pairs = label_pairs(judgments_a, judgments_b)
    if not pairs:
        raise StatsError("kappa requires at least one shared pair key")
    return kappa_from_matrix(confusion_from_pairs(pairs), weights=weights)


def agreement_report(
    judgments_a: Iterable[SupportJudgment],
    judgments_b: Iterable[SupportJudgment],
) -> AgreementReport:
    a, abstained_a = _labeled_by_key(judgments_a, "A")
    b, abstained_b = _labeled_by_key(judgments_b, "B")
    shared = sorted(a.keys() & b.keys())
    if not shared:
        raise StatsError("no shared pairs between the two judgment sets")
    pairs = [(a[key], b[key]) for key in shared]
    matrix = confusion_from_pairs(pairs)
    return AgreementReport(
        matrix=matrix,
        exact_agreement_rate=exact_agreement(matrix),
        kappa=kappa_from_matrix(matrix),
        pair_count=len(pairs),
        only_in_a=len(a) - len(shared),
        only_in_b=len(b) - len(shared),
        abstained_a=abstained_a,
        abstained_b=abstained_b,
    )


def kendall_tau(x: Mapping[str, float], y: Mapping[str, float]) -> float:
    """Tau-b rank correlation over the keys present in both mappings.

    Tie-corrected; NaN when either side is entirely tied.
    """
    shared = sorted(x.keys() & y.keys())
    if len(shared) < 2:
        raise StatsError("kendall tau requires at least 2 shared keys")
    xs = [x[key] for key in shared]
    ys = [y[key] for key in shared]
    n = len(shared)
    concordant = discordant = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = xs[i] - xs[j]
            dy = ys[i] - ys[j]
            product = dx * dy
            if product > 0:
                concordant += 1
            elif product < 0:
                discordant += 1
    n0 = n * (n - 1) // 2
    n1 = _tie_correction(xs)
    n2 = _tie_correction(ys)
    if n1 == n0 or n2 == n0:
        return float("nan")
    return (concordant - discordant) / math.sqrt((n0 - n1) * (n0 - n2))


def _tie_correction(values: Sequence[float]) -> int:
    counts: dict[float, int] = {}
    for value in values:
        counts[value] = counts.get(value, 0) + 1
    return sum(c * (c - 1) // 2 for c in counts.values())


def label_distribution(
    judgments: Iterable[SupportJudgment],
) -> dict[SupportLabel, float]:
    """Per-label proportions over the labeled (non-abstain) judgments."""
    counts = {label: 0 for label in LABEL_ORDER}
    total = 0
    for judgment in judgments:
        if judgment.abstained:
            continue
        counts[judgment.label] += 1
        total += 1
    if total == 0:
        raise StatsError("label distribution requires at least one labeled judgment")
    return {label: counts[label] / total for label in LABEL_ORDER}


def sample_disagreements(
    judgments_a: Iterable[SupportJudgment],
    judgments_b: Iterable[SupportJudgment],
    per_topic: int = 15,
    seed: int | None = None,
) -> list[PairKey]:
    """Seeded uniform sample of disagreeing pair keys, capped per topic.

    Topics are processed in sorted order with one seeded generator, so
    a fixed seed reproduces the sample exactly. Output is sorted
    canonically.
    """
    if per_topic < 1:
        raise ValueError("per_topic must be >= 1")
    if seed is None:
        raise ValueError("disagreement sampling requires an explicit seed")
    a, _ = _labeled_by_key(judgments_a, "A")
    b, _ = _labeled_by_key(judgments_b, "B")
    by_topic: dict[str, list[PairKey]] = {}
    for key in sorted(a.keys() & b.keys()):
        if a[key] != b[key]:
            by_topic.setdefault(key[0], []).append(key)

    rng = random.Random(seed)
    sampled: list[PairKey] = []
    for topic_id in sorted(by_topic):
        candidates = by_topic[topic_id]
        if len(candidates) <= per_topic:
            sampled.extend(candidates)
            continue
        # Partial Fisher-Yates: stable across platforms and versions.
        pool = list(candidates)
        for i in range(per_topic):
            j = i + rng.randrange(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        sampled.extend(pool[:per_topic])
    return sorted(sampled)
