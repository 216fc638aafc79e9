"""Durable append-only storage for annotation sessions and judgments.

Every acknowledged write is flushed and fsynced before the caller sees
success, so an acknowledged submit survives a hard kill. State is
rebuilt on startup by replaying the logs; a torn trailing line from a
mid-write crash is skipped. The full judgment history is retained;
latest-wins resolution orders by timestamp, then sequence number.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator

from .ingest import judgment_from_record, judgment_record
from .model import Condition, PairKey, SupportJudgment

logger = logging.getLogger(__name__)

_JUDGMENTS_LOG = "judgments.log"
_SESSIONS_LOG = "sessions.log"


class StoreError(RuntimeError):
    pass


@dataclass(frozen=True, slots=True)
class SessionRecord:
    session_id: str
    judge_id: str
    condition: Condition
    topic_ids: tuple[str, ...]
    created_at: str


@dataclass(frozen=True, slots=True)
class StoredJudgment:
    seq: int
    session_id: str
    judgment: SupportJudgment

    @property
    def pair_key(self) -> PairKey:
        return self.judgment.pair_key


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _replay(path: Path) -> Iterator[dict]:
    if not path.exists():
        return
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError:
                logger.warning("%s:%d: skipping torn record", path, lineno)


class AnnotationStore:
    """Append-only log of sessions and judgments under one directory."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._judgments_path = self.data_dir / _JUDGMENTS_LOG
        self._sessions_path = self.data_dir / _SESSIONS_LOG
        self._sessions: dict[str, SessionRecord] = {}
        self._judgments: list[StoredJudgment] = []
        self._seq = 0
        for record in _replay(self._sessions_path):
            session = SessionRecord(
                session_id=record["session_id"],
                judge_id=record["judge_id"],
                condition=Condition(record["condition"]),
                topic_ids=tuple(record["topic_ids"]),
                created_at=record["created_at"],
            )
            self._sessions[session.session_id] = session
        for record in _replay(self._judgments_path):
            stored = StoredJudgment(
                seq=record["seq"],
                session_id=record["session_id"],
                judgment=judgment_from_record(record["judgment"]),
            )
            self._judgments.append(stored)
            self._seq = max(self._seq, stored.seq)
        self._judgments_handle = open(self._judgments_path, "a", encoding="utf-8")
        self._sessions_handle = open(self._sessions_path, "a", encoding="utf-8")

    # -- sessions ----------------------------------------------------------

    def create_session(
        self,
        session_id: str,
        judge_id: str,
        condition: Condition,
        topic_ids: Iterable[str],
    ) -> SessionRecord:
        if session_id in self._sessions:
            raise StoreError(f"session {session_id!r} already exists")
        session = SessionRecord(
            session_id=session_id,
            judge_id=judge_id,
            condition=condition,
            topic_ids=tuple(topic_ids),
            created_at=_utc_now(),
        )
        record = {
            "session_id": session.session_id,
            "judge_id": session.judge_id,
            "condition": session.condition.value,
            "topic_ids": list(session.topic_ids),
            "created_at": session.created_at,
        }
        self._append(self._sessions_handle, record)
        self._sessions[session.session_id] = session
        return session

    def get_session(self, session_id: str) -> SessionRecord | None:
        return self._sessions.get(session_id)

    @property
    def sessions(self) -> dict[str, SessionRecord]:
        return dict(self._sessions)

    # -- judgments ---------------------------------------------------------

    def append_judgment(self, session_id: str, judgment: SupportJudgment) -> StoredJudgment:
        """Durably record one judgment; returns after fsync."""
        if session_id not in self._sessions:
            raise StoreError(f"unknown session {session_id!r}")
        self._seq += 1
        stored = StoredJudgment(seq=self._seq, session_id=session_id, judgment=judgment)
        record = {
            "seq": stored.seq,
            "session_id": session_id,
            "judgment": judgment_record(judgment),
        }
        self._append(self._judgments_handle, record)
        self._judgments.append(stored)
        return stored

    def _append(self, handle, record: dict) -> None:
        handle.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
        handle.flush()
        os.fsync(handle.fileno())

    def history(
        self,
        session_id: str | None = None,
        pair_key: PairKey | None = None,
    ) -> list[StoredJudgment]:
        """Full audit trail, optionally narrowed to a session or pair."""
        out = self._judgments
        if session_id is not None:
            out = [s for s in out if s.session_id == session_id]
        if pair_key is not None:
            out = [s for s in out if s.pair_key == pair_key]
        return list(out)

    def judged_pairs(self, session_id: str) -> set[PairKey]:
        return {s.pair_key for s in self._judgments if s.session_id == session_id}

    def latest_judgments(
        self,
        judge_id: str | None = None,
        condition: Condition | None = None,
        topic_id: str | None = None,
    ) -> list[SupportJudgment]:
        """Latest judgment per (pair key, judge), deterministically ordered.

        Later means greater (timestamp, seq); records lacking a
        timestamp sort before any stamped one with the same pair.
        """
        latest: dict[tuple[PairKey, str], StoredJudgment] = {}
        for stored in self._judgments:
            judgment = stored.judgment
            key = (stored.pair_key, judgment.judge_id)
            current = latest.get(key)
            if current is None or _recency(stored) > _recency(current):
                latest[key] = stored
        selected = [s.judgment for _, s in sorted(latest.items(), key=lambda kv: kv[0])]
        if judge_id is not None:
            selected = [j for j in selected if j.judge_id == judge_id]
        if condition is not None:
            selected = [j for j in selected if j.condition is condition]
        if topic_id is not None:
            selected = [j for j in selected if j.topic_id == topic_id]
        return selected

    def compact(self) -> None:
        """Rewrite the judgment log keeping the full history, dropping torn lines."""
        tmp = self._judgments_path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as out:
            for stored in self._judgments:
                record = {
                    "seq": stored.seq,
                    "session_id": stored.session_id,
                    "judgment": judgment_record(stored.judgment),
                }
                out.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
            out.flush()
            os.fsync(out.fileno())
        self._judgments_handle.close()
        os.replace(tmp, self._judgments_path)
        self._judgments_handle = open(self._judgments_path, "a", encoding="utf-8")

    def close(self) -> None:
        self._judgments_handle.close()
        self._sessions_handle.close()

    def __enter__(self) -> "AnnotationStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _recency(stored: StoredJudgment) -> tuple[str, int]:
    return (stored.judgment.timestamp or "", stored.seq)
