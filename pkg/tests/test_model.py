import pytest
from hypothesis import given
from hypothesis import strategies as st

from supporteval.model import (
    MAX_CITATIONS_PER_SENTENCE,
    SENTINEL_PASSAGE_ID,
    AnswerRecord,
    Condition,
    Passage,
    Sentence,
    SupportJudgment,
    SupportLabel,
    first_citation_pairs,
    weight_of,
)


def make_answer(citation_counts, topic_id="t1", run_id="r1"):
    sentences = tuple(
        Sentence(
            text=f"Sentence {i}.",
            citations=tuple(f"p{i}_{j}" for j in range(count)),
        )
        for i, count in enumerate(citation_counts)
    )
    return AnswerRecord(topic_id=topic_id, run_id=run_id, sentences=sentences)


class TestWeightOf:
    def test_full_support(self):
        assert weight_of(SupportLabel.FULL_SUPPORT) == 1.0

    def test_partial_support(self):
        assert weight_of(SupportLabel.PARTIAL_SUPPORT) == 0.5

    def test_no_support(self):
        assert weight_of(SupportLabel.NO_SUPPORT) == 0.0

    def test_monotone_in_support_order(self):
        assert (
            weight_of(SupportLabel.NO_SUPPORT)
            < weight_of(SupportLabel.PARTIAL_SUPPORT)
            < weight_of(SupportLabel.FULL_SUPPORT)
        )


class TestFirstCitationPairs:
    def test_first_cited_only(self):
        answer = AnswerRecord(
            "t1", "r1", (Sentence("Both cited.", ("p3", "p8")),)
        )
        assert first_citation_pairs(answer, k=1) == [(0, "p3")]

    def test_zero_citations_emit_sentinel(self):
        answer = AnswerRecord("t1", "r1", (Sentence("No citations."),))
        assert first_citation_pairs(answer, k=1) == [(0, SENTINEL_PASSAGE_ID)]

    def test_k2_pair_count_matches_enumeration(self):
        # Oracle: one pair per (sentence, citation) up to k, sentinel for none.
        answer = make_answer([1, 0, 2])
        k = 2
        expected = []
        for i, sentence in enumerate(answer.sentences):
            if sentence.citations:
                expected.extend((i, c) for c in sentence.citations[:k])
            else:
                expected.append((i, SENTINEL_PASSAGE_ID))
        assert len(expected) == 4
        assert first_citation_pairs(answer, k=k) == expected

    def test_k_must_be_positive(self):
        with pytest.raises(ValueError):
            first_citation_pairs(make_answer([1]), k=0)

    @given(st.lists(st.integers(min_value=0, max_value=5), min_size=0, max_size=30))
    def test_one_pair_per_sentence_at_k1(self, counts):
        answer = make_answer(counts)
        pairs = first_citation_pairs(answer, k=1)
        assert len(pairs) == len(answer.sentences)
        assert [i for i, _ in pairs] == list(range(len(counts)))


class TestInvariants:
    def test_passage_requires_id_and_text(self):
        with pytest.raises(ValueError):
            Passage(id="", title="t", text="body")
        with pytest.raises(ValueError):
            Passage(id="p1", title="t", text="")

    def test_citation_limit(self):
        citations = tuple(f"p{i}" for i in range(MAX_CITATIONS_PER_SENTENCE + 1))
        with pytest.raises(ValueError, match="citations"):
            Sentence("Too many.", citations)

    def test_duplicate_citations_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            Sentence("Twice.", ("p1", "p1"))

    def test_degenerate_answer(self):
        assert AnswerRecord("t1", "r1", ()).degenerate
        assert not make_answer([1]).degenerate

    def test_post_editing_requires_machine_label(self):
        with pytest.raises(ValueError, match="machine label"):
            SupportJudgment(
                "t1", "r1", 0, "p1", SupportLabel.FULL_SUPPORT,
                judge_id="j", condition=Condition.POST_EDITING,
            )

    def test_from_scratch_forbids_machine_label(self):
        with pytest.raises(ValueError, match="machine label"):
            SupportJudgment(
                "t1", "r1", 0, "p1", SupportLabel.FULL_SUPPORT,
                judge_id="j", condition=Condition.FROM_SCRATCH,
                machine_label_shown=SupportLabel.NO_SUPPORT,
            )

    def test_sentinel_judgment_rules(self):
        with pytest.raises(ValueError, match="sentinel"):
            SupportJudgment(
                "t1", "r1", 0, "p1", SupportLabel.NO_SUPPORT,
                judge_id="j", condition=Condition.AUTOMATIC,
                synthetic_zero_citation=True,
            )
        with pytest.raises(ValueError, match="NO_SUPPORT"):
            SupportJudgment(
                "t1", "r1", 0, SENTINEL_PASSAGE_ID, SupportLabel.FULL_SUPPORT,
                judge_id="j", condition=Condition.AUTOMATIC,
                synthetic_zero_citation=True,
            )

    def test_abstain_requires_reason(self):
        with pytest.raises(ValueError, match="abstain"):
            SupportJudgment(
                "t1", "r1", 0, "p1", None,
                judge_id="j", condition=Condition.AUTOMATIC,
            )
        judgment = SupportJudgment(
            "t1", "r1", 0, "p1", None,
            judge_id="j", condition=Condition.AUTOMATIC,
            abstain_reason="unparseable",
        )
        assert judgment.abstained

    def test_pair_key(self):
        judgment = SupportJudgment(
            "t1", "r1", 2, "p9", SupportLabel.PARTIAL_SUPPORT,
            judge_id="j", condition=Condition.AUTOMATIC,
        )
        assert judgment.pair_key == ("t1", "r1", 2, "p9")
