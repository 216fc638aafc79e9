"""Automatic support judging: prompt construction, label parsing, dispatch.

The judge presents one answer sentence and one cited passage per
prompt and expects one of the three support labels back, with no
explanation. Unparseable responses are retried; a pair whose retry
budget is exhausted becomes an ABSTAIN judgment, never a silent
NO_SUPPORT. A deterministic rule-based mock backend makes the whole
pipeline runnable and bit-reproducible without any network access.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol

from .cache import JudgmentCache, cache_key
from .ingest import Dataset
from .llm import DEFAULT_CREDENTIAL_ENV, ChatCompletionClient, TransportError
from .model import (
    SENTINEL_PASSAGE_ID,
    AnswerRecord,
    Condition,
    Passage,
    SupportJudgment,
    SupportLabel,
    first_citation_pairs,
)

logger = logging.getLogger(__name__)

PROMPT_TEMPLATE_ID = "support-v1"

MOCK_MODEL_NAME = "mock"

PROMPT_TEMPLATE = """In this task, you will evaluate whether each statement is supported by its corresponding citations. Note that the system responses may appear very fluent and well-formed, but contain slight inaccuracies that are not easy to discern at first glance. Pay close attention to the text.

You will be provided with a statement and its corresponding passage which the statement cites. It may be helpful to ask yourself whether it is accurate to say "according to the citation ..." with the statement following this phrase. Be sure to check all of the information in the statement. You will be given three options:

• Full Support: All of the information in the statement is supported in the citation.

• Partial Support: Some parts of the information are supported in the citation, but other parts are missing.

• No Support: The citation does not support any part of the statement.

Please provide your response based on the information in the citation. If you are unsure, use your best judgment. Respond as either "Full Support", "Partial Support", or "No Support" with no additional information.

Statement: {statement}

Citation: {citation}"""

_LABEL_TEXT = {
    "full support": SupportLabel.FULL_SUPPORT,
    "partial support": SupportLabel.PARTIAL_SUPPORT,
    "no support": SupportLabel.NO_SUPPORT,
}

_STOPWORDS = frozenset(
    """a an the and or but if of in on at to for with by from as is are was
    were be been being it its this that these those he she they them his her
    their we you i not no do does did has have had will would can could
    should may might about into over after before between during without
    within than then so such there here when where which who whom what why
    how""".split()
)


class JudgeError(RuntimeError):
    """Judging failed for an identified (sentence, passage) pair."""


@dataclass(frozen=True, slots=True)
class JudgeConfig:
    """Settings for the automatic judge backend."""

    model: str = MOCK_MODEL_NAME
    endpoint: str | None = None
    temperature: float = 0.0
    max_retries: int = 3
    concurrency: int = 4
    template_id: str = PROMPT_TEMPLATE_ID
    cache_path: str | None = None
    timeout: float = 60.0
    credential_env: str = DEFAULT_CREDENTIAL_ENV

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.concurrency < 1:
            raise ValueError("concurrency must be >= 1")

    def build_backend(self) -> "Backend":
        if self.model == MOCK_MODEL_NAME and self.endpoint is None:
            return MockBackend()
        if self.endpoint is None:
            raise ValueError(f"model {self.model!r} requires an endpoint URL")
        return ChatCompletionClient(
            endpoint=self.endpoint,
            model=self.model,
            temperature=self.temperature,
            timeout=self.timeout,
            credential_env=self.credential_env,
        )


@dataclass(frozen=True, slots=True)
class JudgeResponse:
    """Outcome of judging one pair, including retry/cache provenance."""

    raw: str
    label: SupportLabel | None
    attempts: int
    cached: bool


class Backend(Protocol):
    def complete(self, prompt: str) -> str: ...


def build_prompt(sentence_text: str, passage: Passage) -> str:
    """Render the judging prompt for one (sentence, passage) pair.

    The citation slot holds the passage title, a newline, then the
    body; a passage with an empty title renders the body only.
    """
    if not sentence_text.strip():
        raise ValueError("sentence text must be non-empty")
    citation = f"{passage.title}\n{passage.text}" if passage.title else passage.text
    return PROMPT_TEMPLATE.format(statement=sentence_text, citation=citation)


def parse_label(raw: str) -> SupportLabel | None:
    """Extract the support label from a judge response, or None.

    The trimmed, case-folded response may equal one label outright;
    failing that, exactly one distinct label string must occur as a
    substring. Zero or two-plus distinct labels is a parse failure.
    """
    normalized = re.sub(r"\s+", " ", raw).strip().lower()
    trimmed = normalized.strip(" \t\"'`*._,:;!()[]")
    if trimmed in _LABEL_TEXT:
        return _LABEL_TEXT[trimmed]
    present = [label for text, label in _LABEL_TEXT.items() if text in normalized]
    if len(present) == 1:
        return present[0]
    return None


def _content_tokens(text: str) -> set[str]:
    return {t for t in re.findall(r"[a-z0-9]+", text.lower()) if t not in _STOPWORDS}


def mock_judge(sentence_text: str, passage: Passage) -> SupportLabel:
    """Deterministic rule-based judge used for tests and dry runs.

    Verbatim containment of the sentence in the passage is full
    support; a content-token overlap ratio of at least 0.5 is partial
    support; anything else is no support.
    """
    norm_sentence = re.sub(r"\s+", " ", sentence_text).strip().lower()
    norm_passage = re.sub(r"\s+", " ", f"{passage.title} {passage.text}").strip().lower()
    if norm_sentence and norm_sentence in norm_passage:
        return SupportLabel.FULL_SUPPORT
    sentence_tokens = _content_tokens(sentence_text)
    if not sentence_tokens:
        return SupportLabel.NO_SUPPORT
    passage_tokens = _content_tokens(f"{passage.title} {passage.text}")
    overlap = len(sentence_tokens & passage_tokens) / len(sentence_tokens)
    if overlap >= 0.5:
        return SupportLabel.PARTIAL_SUPPORT
    return SupportLabel.NO_SUPPORT


_STATEMENT_MARKER = "\n\nStatement: "
_CITATION_MARKER = "\n\nCitation: "


class MockBackend:
    """Answers prompts with the mock judge's label text."""

    def complete(self, prompt: str) -> str:
        statement_at = prompt.rindex(_STATEMENT_MARKER) + len(_STATEMENT_MARKER)
        citation_at = prompt.rindex(_CITATION_MARKER)
        statement = prompt[statement_at:citation_at]
        citation = prompt[citation_at + len(_CITATION_MARKER):]
        title, _, body = citation.partition("\n")
        if not body:
            title, body = "", citation
        passage = Passage(id="mock", title=title, text=body)
        label = mock_judge(statement, passage)
        return {
            SupportLabel.FULL_SUPPORT: "Full Support",
            SupportLabel.PARTIAL_SUPPORT: "Partial Support",
            SupportLabel.NO_SUPPORT: "No Support",
        }[label]


class CountingBackend:
    """Wraps a backend and counts dispatches; used for cache assertions."""

    def __init__(self, inner: Backend):
        self.inner = inner
        self.calls = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        return self.inner.complete(prompt)


def _complete_with_retries(
    prompt: str,
    key: str,
    config: JudgeConfig,
    backend: Backend,
    cache: JudgmentCache | None,
) -> JudgeResponse:
    if cache is not None:
        entry = cache.get(key)
        if entry is not None:
            return JudgeResponse(entry.raw_response, entry.parsed_label, 0, True)
    raw = ""
    label: SupportLabel | None = None
    attempts = 0
    for _ in range(config.max_retries + 1):
        attempts += 1
        raw = backend.complete(prompt)
        label = parse_label(raw)
        if label is not None:
            break
    if cache is not None:
        cache.put(key, raw, label, config.model)
    return JudgeResponse(raw, label, attempts, False)


def judge_pair(
    sentence_text: str,
    passage: Passage,
    config: JudgeConfig,
    *,
    topic_id: str,
    run_id: str,
    sentence_index: int,
    backend: Backend | None = None,
    cache: JudgmentCache | None = None,
) -> SupportJudgment:
    """Judge one (sentence, passage) pair automatically.

    A cache hit short-circuits dispatch entirely. An exhausted retry
    budget yields an ABSTAIN judgment; a transport failure raises with
    the pair identity.
    """
    if passage.id == SENTINEL_PASSAGE_ID:
        raise ValueError("sentinel pairs are never dispatched to a judge")
    backend = backend or config.build_backend()
    prompt = build_prompt(sentence_text, passage)
    key = cache_key(config.template_id, config.model, sentence_text, passage.id, passage.text)
    try:
        response = _complete_with_retries(prompt, key, config, backend, cache)
    except TransportError as exc:
        raise JudgeError(
            f"transport failure judging (topic={topic_id}, run={run_id}, "
            f"sentence={sentence_index}, passage={passage.id}): {exc}"
        ) from exc
    abstain_reason = None
    if response.label is None:
        abstain_reason = f"unparseable response after {response.attempts} attempts"
    return SupportJudgment(
        topic_id=topic_id,
        run_id=run_id,
        sentence_index=sentence_index,
        passage_id=passage.id,
        label=response.label,
        judge_id=config.model,
        condition=Condition.AUTOMATIC,
        abstain_reason=abstain_reason,
    )


def synthetic_zero_citation_judgment(
    topic_id: str, run_id: str, sentence_index: int, judge_id: str,
    condition: Condition = Condition.AUTOMATIC,
    machine_label_shown: SupportLabel | None = None,
    timestamp: str | None = None,
) -> SupportJudgment:
    """The hard-labeled NO_SUPPORT judgment for a zero-citation sentence."""
    return SupportJudgment(
        topic_id=topic_id,
        run_id=run_id,
        sentence_index=sentence_index,
        passage_id=SENTINEL_PASSAGE_ID,
        label=SupportLabel.NO_SUPPORT,
        judge_id=judge_id,
        condition=condition,
        machine_label_shown=machine_label_shown,
        timestamp=timestamp,
        synthetic_zero_citation=True,
    )


def judge_run(
    dataset: Dataset,
    answer: AnswerRecord,
    config: JudgeConfig,
    k: int = 1,
    backend: Backend | None = None,
    cache: JudgmentCache | None = None,
) -> list[SupportJudgment]:
    """Judge every first-k-citation pair of one answer.

    Zero-citation sentences get synthetic NO_SUPPORT judgments without
    dispatch. Output order is canonical (sentence index, citation
    rank) regardless of dispatch completion order.
    """
    if answer.degenerate:
        logger.warning(
            "answer (topic=%s, run=%s) has no sentences; nothing to judge",
            answer.topic_id, answer.run_id,
        )
        return []
    backend = backend or config.build_backend()
    owns_cache = cache is None and config.cache_path is not None
    if owns_cache:
        cache = JudgmentCache(config.cache_path)
    try:
        pairs = first_citation_pairs(answer, k)
        dispatch = [(i, pid) for i, pid in pairs if pid != SENTINEL_PASSAGE_ID]
        missing = [pid for _, pid in dispatch if pid not in dataset.passages]
        if missing:
            raise JudgeError(
                f"run {answer.run_id!r} topic {answer.topic_id!r} cites passages "
                f"missing from the store: {sorted(set(missing))}"
            )

        def judge_one(pair: tuple[int, str]) -> tuple[tuple[int, str], SupportJudgment]:
            index, pid = pair
            judgment = judge_pair(
                answer.sentences[index].text,
                dataset.passages[pid],
                config,
                topic_id=answer.topic_id,
                run_id=answer.run_id,
                sentence_index=index,
                backend=backend,
                cache=cache,
            )
            return pair, judgment

        results: dict[tuple[int, str], SupportJudgment] = {}
        if config.concurrency > 1 and len(dispatch) > 1:
            with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
                for pair, judgment in pool.map(judge_one, dispatch):
                    results[pair] = judgment
        else:
            for pair in dispatch:
                key, judgment = judge_one(pair)
                results[key] = judgment

        judgments: list[SupportJudgment] = []
        for index, pid in pairs:
            if pid == SENTINEL_PASSAGE_ID:
                judgments.append(
                    synthetic_zero_citation_judgment(
                        answer.topic_id, answer.run_id, index, config.model
                    )
                )
            else:
                judgments.append(results[(index, pid)])
        return judgments
    finally:
        if owns_cache and cache is not None:
            cache.close()
