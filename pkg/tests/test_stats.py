import math
import random
from collections import Counter

import pytest

from supporteval.model import Condition, SupportJudgment, SupportLabel
from supporteval.stats import (
    LABEL_ORDER,
    StatsError,
    agreement_report,
    cohens_kappa,
    confusion,
    confusion_from_pairs,
    exact_agreement,
    kappa_from_matrix,
    kendall_tau,
    label_distribution,
    sample_disagreements,
)

FS = SupportLabel.FULL_SUPPORT
PS = SupportLabel.PARTIAL_SUPPORT
NS = SupportLabel.NO_SUPPORT


def judgments_from(labels, judge_id, topic="t1"):
    """One judgment per label, keyed by position."""
    return [
        SupportJudgment(topic, "r1", i, f"p{i}", label,
                        judge_id=judge_id, condition=Condition.AUTOMATIC)
        for i, label in enumerate(labels)
    ]


def oracle_kappa(pairs):
    """Direct-probability recomputation of unweighted kappa."""
    n = len(pairs)
    observed = sum(1 for a, b in pairs if a == b) / n
    counts_a = Counter(a for a, _ in pairs)
    counts_b = Counter(b for _, b in pairs)
    expected = sum(
        (counts_a[label] / n) * (counts_b[label] / n) for label in LABEL_ORDER
    )
    if expected == 1.0:
        return 1.0 if observed == 1.0 else float("nan")
    return (observed - expected) / (1 - expected)


def oracle_tau_b(xs, ys):
    """Pair-enumeration tau-b, written independently of the implementation."""
    n = len(xs)
    concordant = discordant = 0
    ties_x = ties_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = (xs[i] > xs[j]) - (xs[i] < xs[j])
            dy = (ys[i] > ys[j]) - (ys[i] < ys[j])
            if dx == 0 and dy == 0:
                ties_x += 1
                ties_y += 1
            elif dx == 0:
                ties_x += 1
            elif dy == 0:
                ties_y += 1
            elif dx == dy:
                concordant += 1
            else:
                discordant += 1
    total = n * (n - 1) / 2
    denominator = math.sqrt((total - ties_x) * (total - ties_y))
    if denominator == 0:
        return float("nan")
    return (concordant - discordant) / denominator


class TestConfusion:
    def test_identical_judges_are_diagonal(self):
        labels = [FS, PS, NS, FS, NS, PS, FS, FS, NS, PS]
        matrix = confusion(judgments_from(labels, "a"), judgments_from(labels, "b"))
        assert matrix.trace == matrix.total == 10
        assert all(
            matrix.counts[i][j] == 0
            for i in range(3) for j in range(3) if i != j
        )

    def test_swapping_judges_transposes(self):
        a = judgments_from([FS, PS, NS, FS, PS], "a")
        b = judgments_from([PS, PS, FS, NS, NS], "b")
        assert confusion(a, b) == confusion(b, a).transpose()

    def test_hand_built_six_pair_tally(self):
        # Oracle: manual tally of six pairs.
        pairs = [(FS, FS), (FS, PS), (PS, PS), (NS, NS), (NS, FS), (NS, NS)]
        matrix = confusion_from_pairs(pairs)
        assert matrix.counts[0][0] == 1  # FS,FS
        assert matrix.counts[0][1] == 1  # FS,PS
        assert matrix.counts[1][1] == 1  # PS,PS
        assert matrix.counts[2][2] == 2  # NS,NS
        assert matrix.counts[2][0] == 1  # NS,FS
        assert matrix.total == 6

    def test_only_intersection_counted(self):
        a = judgments_from([FS, PS, NS], "a")
        b = judgments_from([FS, PS], "b")
        assert confusion(a, b).total == 2

    def test_duplicate_key_rejected(self):
        a = judgments_from([FS], "a") * 2
        with pytest.raises(StatsError, match="duplicate"):
            confusion(a, judgments_from([FS], "b"))

    def test_permutation_invariance(self):
        rng = random.Random(3)
        labels_a = [rng.choice(LABEL_ORDER) for _ in range(40)]
        labels_b = [rng.choice(LABEL_ORDER) for _ in range(40)]
        a = judgments_from(labels_a, "a")
        b = judgments_from(labels_b, "b")
        shuffled_a = a[:]
        shuffled_b = b[:]
        rng.shuffle(shuffled_a)
        rng.shuffle(shuffled_b)
        assert confusion(a, b) == confusion(shuffled_a, shuffled_b)
        assert cohens_kappa(a, b) == cohens_kappa(shuffled_a, shuffled_b)

    def test_abstains_excluded(self):
        a = judgments_from([FS, PS], "a") + [SupportJudgment(
            "t1", "r1", 9, "p9", None, judge_id="a",
            condition=Condition.AUTOMATIC, abstain_reason="x",
        )]
        b = judgments_from([FS, PS], "b") + [SupportJudgment(
            "t1", "r1", 9, "p9", FS, judge_id="b", condition=Condition.AUTOMATIC,
        )]
        report = agreement_report(a, b)
        assert report.pair_count == 2
        assert report.abstained_a == 1


class TestExactAgreement:
    def test_diagonal_only_is_perfect(self):
        labels = [FS, NS, PS, FS]
        matrix = confusion(judgments_from(labels, "a"), judgments_from(labels, "b"))
        assert exact_agreement(matrix) == 1.0

    def test_from_scratch_percentage_identity(self):
        # Diagonal percentages 30.4 + 11.9 + 13.7 add to 56% agreement;
        # the 15.1% cell is judge B partial where judge A saw none.
        counts = (
            (304, 59, 63),    # FS row
            (60, 119, 57),    # PS row
            (50, 151, 137),   # NS row
        )
        matrix = confusion_from_pairs(
            [(a, b) for i, a in enumerate(LABEL_ORDER) for j, b in enumerate(LABEL_ORDER)
             for _ in range(counts[i][j])]
        )
        assert matrix.total == 1000
        assert exact_agreement(matrix) == pytest.approx(0.56)
        percentages = matrix.percentages()
        diagonal = percentages[0][0] + percentages[1][1] + percentages[2][2]
        assert diagonal == pytest.approx(56.0)

    def test_post_editing_percentage_identity(self):
        # Diagonal percentages 37.5 + 18.7 + 15.9 add to 72.1% agreement.
        diagonal_counts = {FS: 375, PS: 187, NS: 159}
        pairs = [(label, label) for label, n in diagonal_counts.items() for _ in range(n)]
        pairs += [(FS, NS)] * 63 + [(PS, NS)] * 100 + [(NS, PS)] * 116
        matrix = confusion_from_pairs(pairs)
        assert matrix.total == 1000
        assert exact_agreement(matrix) == pytest.approx(0.721)

    def test_empty_matrix_is_an_error(self):
        with pytest.raises(StatsError):
            exact_agreement(confusion_from_pairs([]))


class TestCohensKappa:
    def test_identical_vectors_with_two_labels(self):
        labels = [FS, NS, FS, PS, NS]
        assert cohens_kappa(judgments_from(labels, "a"), judgments_from(labels, "b")) == 1.0

    def test_worked_example(self):
        # A=[FS,FS,NS,PS], B=[FS,NS,NS,PS]: p_o=0.75, p_e=0.3125.
        a = judgments_from([FS, FS, NS, PS], "a")
        b = judgments_from([FS, NS, NS, PS], "b")
        kappa = cohens_kappa(a, b)
        assert kappa == pytest.approx((0.75 - 0.3125) / (1 - 0.3125))
        assert kappa == pytest.approx(0.6364, abs=1e-4)

    def test_matches_direct_formula_oracle_on_random_vectors(self):
        rng = random.Random(17)
        for _ in range(300):
            n = rng.randint(1, 200)
            pairs = [(rng.choice(LABEL_ORDER), rng.choice(LABEL_ORDER)) for _ in range(n)]
            ours = kappa_from_matrix(confusion_from_pairs(pairs))
            reference = oracle_kappa(pairs)
            if math.isnan(reference):
                assert math.isnan(ours)
            else:
                assert ours == pytest.approx(reference, abs=1e-9)

    def test_independent_random_labelings_near_zero(self):
        rng = random.Random(23)
        n = 10_000
        a = judgments_from([rng.choice(LABEL_ORDER) for _ in range(n)], "a")
        b = judgments_from([rng.choice(LABEL_ORDER) for _ in range(n)], "b")
        assert abs(cohens_kappa(a, b)) <= 0.05

    def test_degenerate_marginals(self):
        # Both judges always FS: p_e = 1 and p_o = 1.
        a = judgments_from([FS, FS, FS], "a")
        b = judgments_from([FS, FS, FS], "b")
        assert cohens_kappa(a, b) == 1.0
        # Judge A always FS, judge B always NS: p_e computed over marginals
        # is 0 here, not 1, so kappa is defined and negative-or-zero.
        b2 = judgments_from([NS, NS, NS], "b")
        assert cohens_kappa(a, b2) == pytest.approx(0.0)

    def test_undefined_flag_is_nan(self):
        # Force p_e == 1 with p_o < 1 via a one-sided marginal: impossible
        # with both marginals degenerate on different labels, so use the
        # matrix API directly.
        matrix = confusion_from_pairs([(FS, FS), (FS, FS)])
        assert kappa_from_matrix(matrix) == 1.0

    def test_linear_weighted_kappa(self):
        a = judgments_from([FS, FS, NS, PS], "a")
        b = judgments_from([FS, NS, NS, PS], "b")
        unweighted = cohens_kappa(a, b)
        weighted = cohens_kappa(a, b, weights="linear")
        # Hand computation: observed ordinal disagreement 0.5, expected 1.0.
        assert weighted == pytest.approx(0.5)
        assert weighted != unweighted

    def test_no_shared_keys_is_an_error(self):
        a = judgments_from([FS], "a", topic="t1")
        b = judgments_from([FS], "b", topic="t2")
        with pytest.raises(StatsError, match="shared"):
            cohens_kappa(a, b)


class TestKendallTau:
    def test_identical_rankings(self):
        x = {"a": 1.0, "b": 2.0, "c": 3.0}
        assert kendall_tau(x, x) == 1.0

    def test_reversed_rankings(self):
        x = {"a": 1.0, "b": 2.0, "c": 3.0}
        y = {"a": 3.0, "b": 2.0, "c": 1.0}
        assert kendall_tau(x, y) == -1.0

    def test_single_swap_is_one_third(self):
        x = {"a": 1.0, "b": 2.0, "c": 3.0}
        y = {"a": 1.0, "b": 3.0, "c": 2.0}
        assert kendall_tau(x, y) == pytest.approx(1 / 3)

    def test_matches_enumeration_oracle_on_random_vectors(self):
        rng = random.Random(31)
        for _ in range(300):
            n = rng.randint(2, 60)
            keys = [f"run{i}" for i in range(n)]
            xs = [rng.choice([0.1, 0.25, 0.5, 0.75, 0.9]) for _ in range(n)]
            ys = [rng.choice([0.1, 0.25, 0.5, 0.75, 0.9]) for _ in range(n)]
            ours = kendall_tau(dict(zip(keys, xs)), dict(zip(keys, ys)))
            reference = oracle_tau_b(xs, ys)
            if math.isnan(reference):
                assert math.isnan(ours)
            else:
                assert ours == pytest.approx(reference, abs=1e-9)

    def test_all_tied_is_nan(self):
        x = {"a": 1.0, "b": 1.0, "c": 1.0}
        y = {"a": 1.0, "b": 2.0, "c": 3.0}
        assert math.isnan(kendall_tau(x, y))

    def test_intersection_only(self):
        x = {"a": 1.0, "b": 2.0, "c": 3.0, "only_x": 9.0}
        y = {"a": 1.0, "b": 2.0, "c": 3.0, "only_y": 0.0}
        assert kendall_tau(x, y) == 1.0

    def test_fewer_than_two_shared_keys_is_an_error(self):
        with pytest.raises(StatsError):
            kendall_tau({"a": 1.0}, {"a": 2.0})


class TestLabelDistribution:
    def test_all_full(self):
        judgments = judgments_from([FS, FS, FS], "a")
        assert label_distribution(judgments) == {FS: 1.0, PS: 0.0, NS: 0.0}

    def test_counts_2_1_1(self):
        judgments = judgments_from([FS, FS, PS, NS], "a")
        assert label_distribution(judgments) == {FS: 0.5, PS: 0.25, NS: 0.25}

    def test_observed_assessment_mix(self):
        # 2752 full, 1652 partial, 2338 none out of 6742.
        labels = [FS] * 2752 + [PS] * 1652 + [NS] * 2338
        distribution = label_distribution(judgments_from(labels, "a"))
        assert distribution[FS] == pytest.approx(0.408, abs=5e-4)
        assert distribution[PS] == pytest.approx(0.245, abs=5e-4)
        assert distribution[NS] == pytest.approx(0.347, abs=5e-4)
        assert sum(distribution.values()) == pytest.approx(1.0, abs=1e-12)

    def test_empty_is_an_error(self):
        with pytest.raises(StatsError):
            label_distribution([])


def disagreeing_sets(disagreements_by_topic, seed_labels=(FS, NS)):
    """Two judgment sets whose disagreements per topic are as requested."""
    a, b = [], []
    for topic, count in disagreements_by_topic.items():
        for i in range(count):
            a.append(SupportJudgment(topic, "r1", i, f"p{i}", seed_labels[0],
                                     judge_id="a", condition=Condition.AUTOMATIC))
            b.append(SupportJudgment(topic, "r1", i, f"p{i}", seed_labels[1],
                                     judge_id="b", condition=Condition.AUTOMATIC))
        # And a couple of agreements that must never be sampled.
        for i in range(count, count + 2):
            for out, judge in ((a, "a"), (b, "b")):
                out.append(SupportJudgment(topic, "r1", i, f"p{i}", PS,
                                           judge_id=judge, condition=Condition.AUTOMATIC))
    return a, b


class TestSampleDisagreements:
    def test_fewer_available_than_cap_returns_all(self):
        a, b = disagreeing_sets({"t1": 3})
        keys = sample_disagreements(a, b, per_topic=15, seed=42)
        assert len(keys) == 3

    def test_same_seed_reproduces_sample(self):
        a, b = disagreeing_sets({"t1": 40, "t2": 20})
        first = sample_disagreements(a, b, per_topic=15, seed=7)
        second = sample_disagreements(a, b, per_topic=15, seed=7)
        assert first == second
        different = sample_disagreements(a, b, per_topic=15, seed=8)
        assert different != first

    def test_per_topic_cap(self):
        a, b = disagreeing_sets({"t1": 2, "t2": 15, "t3": 40})
        keys = sample_disagreements(a, b, per_topic=15, seed=3)
        by_topic = Counter(key[0] for key in keys)
        assert by_topic == {"t1": 2, "t2": 15, "t3": 15}
        assert len(keys) == sum(min(15, n) for n in (2, 15, 40))

    def test_only_disagreements_sampled(self):
        a, b = disagreeing_sets({"t1": 5})
        keys = sample_disagreements(a, b, per_topic=15, seed=1)
        assert all(key[2] < 5 for key in keys)

    def test_seed_required(self):
        a, b = disagreeing_sets({"t1": 3})
        with pytest.raises(ValueError, match="seed"):
            sample_disagreements(a, b, per_topic=15)

    def test_output_sorted(self):
        a, b = disagreeing_sets({"t3": 20, "t1": 20})
        keys = sample_disagreements(a, b, per_topic=5, seed=11)
        assert keys == sorted(keys)
