"""HTTP service backing human support assessment.

Serves (sentence, passage) items to annotation sessions in canonical
order, persists every acknowledged judgment durably, and exports the
judgment file format. The machine label is disclosed only to
POST_EDITING sessions, enforced at serialization: a FROM_SCRATCH
payload never contains the field at all.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from fastapi import Depends, FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .ingest import (
    Dataset,
    _write_jsonl,
    judgment_record,
    load_dataset,
    load_judgments,
)
from .judge import synthetic_zero_citation_judgment
from .model import (
    SENTINEL_PASSAGE_ID,
    Condition,
    PairKey,
    SupportJudgment,
    SupportLabel,
    first_citation_pairs,
)
from .store import AnnotationStore, SessionRecord

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class ServiceConfig:
    topics_path: str | Path
    passages_path: str | Path
    run_paths: Sequence[str | Path]
    data_dir: str | Path
    auto_judgments_path: str | Path | None = None
    token: str | None = None
    citations_per_sentence: int = 1


class ApiError(Exception):
    def __init__(self, status_code: int, code: str, detail: str):
        self.status_code = status_code
        self.code = code
        self.detail = detail
        super().__init__(detail)


class CreateSessionRequest(BaseModel):
    session_id: str | None = None
    judge_id: str
    condition: str
    topic_ids: list[str]


class SubmitJudgmentRequest(BaseModel):
    topic_id: str
    run_id: str
    sentence_index: int
    passage_id: str
    label: str


@dataclass(slots=True)
class ServiceState:
    dataset: Dataset
    store: AnnotationStore
    auto_labels: dict[PairKey, SupportLabel]
    config: ServiceConfig
    queues: dict[str, list[PairKey]] = field(default_factory=dict)

    def queue_for(self, session: SessionRecord) -> list[PairKey]:
        queue = self.queues.get(session.session_id)
        if queue is None:
            queue = _build_queue(self.dataset, session.topic_ids, self.config.citations_per_sentence)
            self.queues[session.session_id] = queue
        return queue


def _build_queue(dataset: Dataset, topic_ids: Sequence[str], k: int) -> list[PairKey]:
    topic_set = set(topic_ids)
    queue: list[PairKey] = []
    for answer in dataset.runs:
        if answer.topic_id not in topic_set:
            continue
        for index, pid in first_citation_pairs(answer, k):
            if pid != SENTINEL_PASSAGE_ID:
                queue.append((answer.topic_id, answer.run_id, index, pid))
    queue.sort(key=lambda key: (key[0], key[1], key[2], key[3]))
    return queue


def _sentinel_pairs(dataset: Dataset, topic_ids: Sequence[str], k: int) -> list[PairKey]:
    topic_set = set(topic_ids)
    pairs: list[PairKey] = []
    for answer in dataset.runs:
        if answer.topic_id not in topic_set:
            continue
        for index, pid in first_citation_pairs(answer, k):
            if pid == SENTINEL_PASSAGE_ID:
                pairs.append((answer.topic_id, answer.run_id, index, pid))
    return sorted(pairs)


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def create_app(config: ServiceConfig) -> FastAPI:
    dataset, report = load_dataset(config.topics_path, config.passages_path, config.run_paths)
    if report.quarantined_count:
        logger.warning("%d run records quarantined at service startup", report.quarantined_count)
    auto_labels: dict[PairKey, SupportLabel] = {}
    if config.auto_judgments_path is not None:
        for judgment in load_judgments(config.auto_judgments_path):
            if judgment.condition is Condition.AUTOMATIC and judgment.label is not None:
                auto_labels[judgment.pair_key] = judgment.label
    state = ServiceState(
        dataset=dataset,
        store=AnnotationStore(config.data_dir),
        auto_labels=auto_labels,
        config=config,
    )

    app = FastAPI(title="supporteval annotation service")
    app.state.service = state

    def require_token(request: Request) -> None:
        if config.token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {config.token}":
            raise ApiError(401, "unauthorized", "missing or invalid bearer token")

    @app.exception_handler(ApiError)
    async def handle_api_error(_request: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.status_code,
            content={"error": {"code": exc.code, "detail": exc.detail}},
        )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/sessions", status_code=201, dependencies=[Depends(require_token)])
    def create_session(body: CreateSessionRequest) -> dict:
        try:
            condition = Condition(body.condition)
        except ValueError:
            raise ApiError(422, "invalid_condition", f"unknown condition {body.condition!r}")
        if condition is Condition.AUTOMATIC:
            raise ApiError(422, "invalid_condition", "sessions are for human conditions only")
        if not body.judge_id:
            raise ApiError(422, "invalid_judge", "judge_id must be non-empty")
        unknown = sorted(set(body.topic_ids) - state.dataset.topics.keys())
        if unknown:
            raise ApiError(422, "unknown_topic", f"unknown topic ids: {unknown}")
        if not body.topic_ids:
            raise ApiError(422, "unknown_topic", "topic_ids must be non-empty")

        session_id = body.session_id or f"{body.judge_id}-{len(state.store.sessions) + 1}"
        if state.store.get_session(session_id) is not None:
            raise ApiError(409, "duplicate_session", f"session {session_id!r} already exists")

        queue = _build_queue(state.dataset, body.topic_ids, config.citations_per_sentence)
        if condition is Condition.POST_EDITING:
            uncovered: dict[str, int] = {}
            for key in queue:
                if key not in state.auto_labels:
                    uncovered[key[0]] = uncovered.get(key[0], 0) + 1
            if uncovered:
                missing = ", ".join(f"{t} ({n} pairs)" for t, n in sorted(uncovered.items()))
                raise ApiError(
                    409,
                    "missing_auto_coverage",
                    f"topics lack automatic judgments: {missing}",
                )

        session = state.store.create_session(session_id, body.judge_id, condition, body.topic_ids)
        state.queues[session_id] = queue

        # Zero-citation sentences are never queued for humans; record the
        # hard NO_SUPPORT judgments up front.
        machine_shown = (
            SupportLabel.NO_SUPPORT if condition is Condition.POST_EDITING else None
        )
        already = state.store.judged_pairs(session_id)
        for topic_id, run_id, index, _ in _sentinel_pairs(
            state.dataset, body.topic_ids, config.citations_per_sentence
        ):
            judgment = synthetic_zero_citation_judgment(
                topic_id, run_id, index, session.judge_id,
                condition=condition,
                machine_label_shown=machine_shown,
                timestamp=_utc_now(),
            )
            if judgment.pair_key not in already:
                state.store.append_judgment(session_id, judgment)

        return {
            "session_id": session.session_id,
            "judge_id": session.judge_id,
            "condition": session.condition.value,
            "topic_ids": list(session.topic_ids),
            "queue_length": len(queue),
            "created_at": session.created_at,
        }

    def get_session_or_404(session_id: str) -> SessionRecord:
        session = state.store.get_session(session_id)
        if session is None:
            raise ApiError(404, "unknown_session", f"no session {session_id!r}")
        return session

    @app.get("/sessions/{session_id}/next", dependencies=[Depends(require_token)])
    def next_item(session_id: str) -> dict:
        session = get_session_or_404(session_id)
        queue = state.queue_for(session)
        judged = state.store.judged_pairs(session_id)
        position = None
        for index, key in enumerate(queue):
            if key not in judged:
                position = index
                break
        if position is None:
            counts: dict[str, int] = {}
            for judgment in state.store.latest_judgments(judge_id=session.judge_id):
                if judgment.pair_key in set(queue) and judgment.label is not None:
                    counts[judgment.label.value] = counts.get(judgment.label.value, 0) + 1
            return {"done": True, "total": len(queue), "label_counts": counts}

        topic_id, run_id, sentence_index, passage_id = queue[position]
        answer = next(
            a for a in state.dataset.runs
            if a.topic_id == topic_id and a.run_id == run_id
        )
        passage = state.dataset.passages[passage_id]
        item = {
            "done": False,
            "pair": {
                "topic_id": topic_id,
                "run_id": run_id,
                "sentence_index": sentence_index,
                "passage_id": passage_id,
            },
            "sentence_text": answer.sentences[sentence_index].text,
            "passage_title": passage.title,
            "passage_text": passage.text,
            "topic_query": state.dataset.topics[topic_id].query,
            "position": position,
            "total": len(queue),
        }
        # Condition gating happens here, not in the client: FROM_SCRATCH
        # payloads never carry the field.
        if session.condition is Condition.POST_EDITING:
            shown = state.auto_labels.get(queue[position])
            if shown is not None:
                item["machine_label"] = shown.value
        return item

    @app.post("/sessions/{session_id}/judgments", dependencies=[Depends(require_token)])
    def submit_judgment(session_id: str, body: SubmitJudgmentRequest) -> dict:
        session = get_session_or_404(session_id)
        queue = state.queue_for(session)
        key: PairKey = (body.topic_id, body.run_id, body.sentence_index, body.passage_id)
        if key not in set(queue):
            raise ApiError(409, "foreign_pair", f"pair {key} is not in this session's queue")
        try:
            label = SupportLabel(body.label)
        except ValueError:
            raise ApiError(422, "invalid_label", f"unknown label {body.label!r}")
        machine_shown = (
            state.auto_labels.get(key)
            if session.condition is Condition.POST_EDITING
            else None
        )
        judgment = SupportJudgment(
            topic_id=body.topic_id,
            run_id=body.run_id,
            sentence_index=body.sentence_index,
            passage_id=body.passage_id,
            label=label,
            judge_id=session.judge_id,
            condition=session.condition,
            machine_label_shown=machine_shown,
            timestamp=_utc_now(),
        )
        stored = state.store.append_judgment(session_id, judgment)
        return {
            "stored": judgment_record(judgment),
            "seq": stored.seq,
            "history_length": len(state.store.history(pair_key=key)),
        }

    @app.get("/export", dependencies=[Depends(require_token)])
    def export(
        judge: str | None = None,
        condition: str | None = None,
        topic: str | None = None,
    ) -> PlainTextResponse:
        condition_filter: Condition | None = None
        if condition is not None:
            try:
                condition_filter = Condition(condition)
            except ValueError:
                raise ApiError(422, "invalid_condition", f"unknown condition {condition!r}")
        judgments = state.store.latest_judgments(
            judge_id=judge, condition=condition_filter, topic_id=topic
        )
        out = io.StringIO()
        _write_jsonl(out, "judgments", (judgment_record(j) for j in judgments))
        return PlainTextResponse(out.getvalue(), media_type="text/plain; charset=utf-8")

    return app
