"""Append-only response cache for the automatic judge.

Keys are content hashes over (template id, model, sentence text,
passage id, passage text), so two distinct pairs can never share a key.
Parse failures are cached too (parsed_label null): a rerun returns the
recorded ABSTAIN instead of re-dispatching.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .ingest import SCHEMA_VERSION
from .model import SupportLabel

_CACHE_SCHEMA = "judge_cache"


def cache_key(
    template_id: str,
    model: str,
    sentence_text: str,
    passage_id: str,
    passage_text: str,
) -> str:
    material = json.dumps(
        [template_id, model, sentence_text, passage_id, passage_text],
        ensure_ascii=False,
    )
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


@dataclass(frozen=True, slots=True)
class CacheEntry:
    cache_key: str
    raw_response: str
    parsed_label: SupportLabel | None
    model: str
    timestamp: str


class JudgmentCache:
    """JSONL-backed cache; concurrent readers, serialized appends."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._entries: dict[str, CacheEntry] = {}
        self._lock = threading.Lock()
        self._load()
        self._handle = open(self.path, "a", encoding="utf-8")
        if self._fresh:
            header = {"schema": _CACHE_SCHEMA, "schema_version": SCHEMA_VERSION}
            self._handle.write(json.dumps(header, sort_keys=True) + "\n")
            self._handle.flush()

    def _load(self) -> None:
        self._fresh = not self.path.exists() or self.path.stat().st_size == 0
        if self._fresh:
            return
        with open(self.path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError:
                    # Torn trailing write from a killed process: ignore.
                    continue
                if lineno == 1 and record.get("schema") == _CACHE_SCHEMA:
                    continue
                label = record.get("parsed_label")
                self._entries[record["cache_key"]] = CacheEntry(
                    cache_key=record["cache_key"],
                    raw_response=record["raw_response"],
                    parsed_label=SupportLabel(label) if label else None,
                    model=record["model"],
                    timestamp=record["timestamp"],
                )

    def get(self, key: str) -> CacheEntry | None:
        return self._entries.get(key)

    def put(self, key: str, raw_response: str, parsed_label: SupportLabel | None, model: str) -> CacheEntry:
        entry = CacheEntry(
            cache_key=key,
            raw_response=raw_response,
            parsed_label=parsed_label,
            model=model,
            timestamp=datetime.now(timezone.utc).isoformat(),
        )
        record = {
            "cache_key": key,
            "raw_response": raw_response,
            "parsed_label": parsed_label.value if parsed_label else None,
            "model": model,
            "timestamp": entry.timestamp,
        }
        with self._lock:
            self._handle.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
            self._handle.flush()
            self._entries[key] = entry
        return entry

    def __len__(self) -> int:
        return len(self._entries)

    def close(self) -> None:
        self._handle.close()

    def __enter__(self) -> "JudgmentCache":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
