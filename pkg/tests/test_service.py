import json

import pytest
from fastapi.testclient import TestClient

from supporteval.ingest import Topic, load_judgments, write_judgments, write_passages, write_runs, write_topics
from supporteval.corpus import PassageChunk
from supporteval.model import (
    AnswerRecord,
    Condition,
    Sentence,
    SupportJudgment,
    SupportLabel,
)
from supporteval.service import ServiceConfig, create_app


def chunk(pid, text, doc="d1"):
    return PassageChunk(id=pid, title=f"Title {pid}", text=text, doc_id=doc,
                        start_sentence=0, end_sentence=1)


@pytest.fixture
def paths(tmp_path):
    """Dataset: one topic, two runs of three cited sentences plus one uncited."""
    topics = tmp_path / "topics.tsv"
    passages = tmp_path / "passages.jsonl"
    runs = tmp_path / "runs.jsonl"
    write_topics(topics, [Topic("t1", "how rain forms"), Topic("t2", "why snow falls")])
    write_passages(passages, [
        chunk(f"p{i}", f"Passage body number {i} about rain and clouds.") for i in range(6)
    ])
    write_runs(runs, [
        AnswerRecord("t1", "runA", (
            Sentence("Rain forms in clouds.", ("p0",)),
            Sentence("Drops grow by collision.", ("p1",)),
            Sentence("Cold air helps.", ("p2",)),
        )),
        AnswerRecord("t1", "runB", (
            Sentence("Clouds hold water.", ("p3",)),
            Sentence("Water falls as rain.", ("p4",)),
            Sentence("Completely uncited claim."),
            Sentence("Rain is wet.", ("p5",)),
        )),
        AnswerRecord("t2", "runA", (
            Sentence("Snow is frozen rain.", ("p0",)),
        )),
    ])
    return {"topics": topics, "passages": passages, "runs": runs, "data": tmp_path / "data"}


def make_client(paths, auto_judgments=None, token=None):
    config = ServiceConfig(
        topics_path=paths["topics"],
        passages_path=paths["passages"],
        run_paths=[paths["runs"]],
        data_dir=paths["data"],
        auto_judgments_path=auto_judgments,
        token=token,
    )
    app = create_app(config)
    return TestClient(app)


def auto_judgments_file(tmp_path, pairs, label=SupportLabel.PARTIAL_SUPPORT):
    path = tmp_path / "auto.jsonl"
    judgments = [
        SupportJudgment(t, r, i, p, label, judge_id="mock", condition=Condition.AUTOMATIC)
        for (t, r, i, p) in pairs
    ]
    write_judgments(path, judgments)
    return path

ALL_T1_PAIRS = [
    ("t1", "runA", 0, "p0"), ("t1", "runA", 1, "p1"), ("t1", "runA", 2, "p2"),
    ("t1", "runB", 0, "p3"), ("t1", "runB", 1, "p4"), ("t1", "runB", 3, "p5"),
]


class TestSessionCreation:
    def test_queue_covers_all_cited_pairs(self, paths):
        client = make_client(paths)
        response = client.post("/sessions", json={
            "session_id": "s1", "judge_id": "human-1",
            "condition": "FROM_SCRATCH", "topic_ids": ["t1"],
        })
        assert response.status_code == 201
        assert response.json()["queue_length"] == 6

    def test_duplicate_session_conflicts(self, paths):
        client = make_client(paths)
        body = {"session_id": "s1", "judge_id": "human-1",
                "condition": "FROM_SCRATCH", "topic_ids": ["t1"]}
        assert client.post("/sessions", json=body).status_code == 201
        response = client.post("/sessions", json=body)
        assert response.status_code == 409
        assert response.json()["error"]["code"] == "duplicate_session"

    def test_post_editing_requires_auto_coverage(self, paths):
        client = make_client(paths)  # no auto judgments loaded
        response = client.post("/sessions", json={
            "session_id": "s1", "judge_id": "human-1",
            "condition": "POST_EDITING", "topic_ids": ["t1"],
        })
        assert response.status_code == 409
        error = response.json()["error"]
        assert error["code"] == "missing_auto_coverage"
        assert "t1" in error["detail"]

    def test_post_editing_with_full_coverage(self, paths, tmp_path):
        auto = auto_judgments_file(tmp_path, ALL_T1_PAIRS)
        client = make_client(paths, auto_judgments=auto)
        response = client.post("/sessions", json={
            "session_id": "s1", "judge_id": "human-1",
            "condition": "POST_EDITING", "topic_ids": ["t1"],
        })
        assert response.status_code == 201

    def test_unknown_topic_rejected(self, paths):
        client = make_client(paths)
        response = client.post("/sessions", json={
            "session_id": "s1", "judge_id": "human-1",
            "condition": "FROM_SCRATCH", "topic_ids": ["t9"],
        })
        assert response.status_code == 422
        assert response.json()["error"]["code"] == "unknown_topic"

    def test_automatic_condition_rejected(self, paths):
        client = make_client(paths)
        response = client.post("/sessions", json={
            "session_id": "s1", "judge_id": "human-1",
            "condition": "AUTOMATIC", "topic_ids": ["t1"],
        })
        assert response.status_code == 422

    def test_sentinel_pairs_recorded_at_creation(self, paths):
        client = make_client(paths)
        client.post("/sessions", json={
            "session_id": "s1", "judge_id": "human-1",
            "condition": "FROM_SCRATCH", "topic_ids": ["t1"],
        })
        export = client.get("/export", params={"judge": "human-1"})
        records = [json.loads(line) for line in export.text.strip().splitlines()[1:]]
        sentinels = [r for r in records if r["synthetic_zero_citation"]]
        assert len(sentinels) == 1
        assert sentinels[0]["passage_id"] == "NONE"
        assert sentinels[0]["label"] == "NO_SUPPORT"


class TestItemFlow:
    def create(self, client, condition="FROM_SCRATCH", session_id="s1", topics=("t1",)):
        response = client.post("/sessions", json={
            "session_id": session_id, "judge_id": "human-1",
            "condition": condition, "topic_ids": list(topics),
        })
        assert response.status_code == 201
        return response.json()

    def test_fresh_session_serves_first_item(self, paths):
        client = make_client(paths)
        self.create(client)
        item = client.get("/sessions/s1/next").json()
        assert item["done"] is False
        assert item["pair"] == {"topic_id": "t1", "run_id": "runA",
                                "sentence_index": 0, "passage_id": "p0"}
        assert item["position"] == 0
        assert item["total"] == 6
        assert item["sentence_text"] == "Rain forms in clouds."
        assert item["topic_query"] == "how rain forms"

    def test_submit_advances_to_next(self, paths):
        client = make_client(paths)
        self.create(client)
        first = client.get("/sessions/s1/next").json()
        response = client.post("/sessions/s1/judgments", json={
            **first["pair"], "label": "FULL_SUPPORT",
        })
        assert response.status_code == 200
        second = client.get("/sessions/s1/next").json()
        assert second["pair"]["sentence_index"] == 1

    def test_full_pass_reaches_done_with_counts(self, paths):
        client = make_client(paths)
        self.create(client)
        labels = ["FULL_SUPPORT", "PARTIAL_SUPPORT", "NO_SUPPORT",
                  "FULL_SUPPORT", "FULL_SUPPORT", "PARTIAL_SUPPORT"]
        for label in labels:
            item = client.get("/sessions/s1/next").json()
            client.post("/sessions/s1/judgments", json={**item["pair"], "label": label})
        done = client.get("/sessions/s1/next").json()
        assert done["done"] is True
        assert done["label_counts"] == {
            "FULL_SUPPORT": 3, "PARTIAL_SUPPORT": 2, "NO_SUPPORT": 1,
        }

    def test_resubmission_overwrites_with_history(self, paths):
        client = make_client(paths)
        self.create(client)
        item = client.get("/sessions/s1/next").json()
        client.post("/sessions/s1/judgments", json={**item["pair"], "label": "FULL_SUPPORT"})
        response = client.post("/sessions/s1/judgments", json={
            **item["pair"], "label": "PARTIAL_SUPPORT",
        })
        assert response.json()["history_length"] == 2
        export = client.get("/export", params={"judge": "human-1"}).text
        records = [json.loads(line) for line in export.strip().splitlines()[1:]]
        target = [r for r in records if r["passage_id"] == item["pair"]["passage_id"]]
        assert len(target) == 1
        assert target[0]["label"] == "PARTIAL_SUPPORT"

    def test_foreign_pair_rejected(self, paths):
        client = make_client(paths)
        self.create(client)
        response = client.post("/sessions/s1/judgments", json={
            "topic_id": "t2", "run_id": "runA", "sentence_index": 0,
            "passage_id": "p0", "label": "FULL_SUPPORT",
        })
        assert response.status_code == 409
        assert response.json()["error"]["code"] == "foreign_pair"

    def test_invalid_label_rejected(self, paths):
        client = make_client(paths)
        self.create(client)
        item = client.get("/sessions/s1/next").json()
        response = client.post("/sessions/s1/judgments", json={
            **item["pair"], "label": "MAYBE",
        })
        assert response.status_code == 422
        assert response.json()["error"]["code"] == "invalid_label"

    def test_unknown_session_404(self, paths):
        client = make_client(paths)
        assert client.get("/sessions/ghost/next").status_code == 404


class TestConditionGating:
    def test_from_scratch_never_serializes_machine_label(self, paths, tmp_path):
        # Even with automatic judgments loaded, FROM_SCRATCH payloads must
        # not contain the field anywhere.
        auto = auto_judgments_file(tmp_path, ALL_T1_PAIRS)
        client = make_client(paths, auto_judgments=auto)
        client.post("/sessions", json={
            "session_id": "s1", "judge_id": "human-1",
            "condition": "FROM_SCRATCH", "topic_ids": ["t1"],
        })
        for _ in range(6):
            response = client.get("/sessions/s1/next")
            assert "machine_label" not in response.text
            item = response.json()
            client.post("/sessions/s1/judgments", json={**item["pair"], "label": "NO_SUPPORT"})
        export = client.get("/export", params={"judge": "human-1"}).text
        assert "machine_label_shown" not in export

    def test_post_editing_shows_machine_label(self, paths, tmp_path):
        auto = auto_judgments_file(tmp_path, ALL_T1_PAIRS, SupportLabel.PARTIAL_SUPPORT)
        client = make_client(paths, auto_judgments=auto)
        client.post("/sessions", json={
            "session_id": "s1", "judge_id": "human-1",
            "condition": "POST_EDITING", "topic_ids": ["t1"],
        })
        item = client.get("/sessions/s1/next").json()
        assert item["machine_label"] == "PARTIAL_SUPPORT"
        client.post("/sessions/s1/judgments", json={**item["pair"], "label": "FULL_SUPPORT"})
        export = client.get("/export", params={"judge": "human-1"}).text
        records = [json.loads(line) for line in export.strip().splitlines()[1:]]
        submitted = [r for r in records if not r["synthetic_zero_citation"]]
        assert submitted[0]["machine_label_shown"] == "PARTIAL_SUPPORT"
        assert submitted[0]["condition"] == "POST_EDITING"


class TestExportAndRecovery:
    def test_export_round_trips_through_ingest(self, paths, tmp_path):
        client = make_client(paths)
        client.post("/sessions", json={
            "session_id": "s1", "judge_id": "human-1",
            "condition": "FROM_SCRATCH", "topic_ids": ["t1"],
        })
        item = client.get("/sessions/s1/next").json()
        client.post("/sessions/s1/judgments", json={**item["pair"], "label": "FULL_SUPPORT"})
        export_path = tmp_path / "export.jsonl"
        export_path.write_text(client.get("/export").text, encoding="utf-8")
        judgments = load_judgments(export_path)
        assert len(judgments) == 2  # one submitted + one sentinel
        assert {j.judge_id for j in judgments} == {"human-1"}

    def test_two_judges_same_pair_export_two_records(self, paths):
        client = make_client(paths)
        for judge, session in (("human-1", "s1"), ("human-2", "s2")):
            client.post("/sessions", json={
                "session_id": session, "judge_id": judge,
                "condition": "FROM_SCRATCH", "topic_ids": ["t1"],
            })
            item = client.get(f"/sessions/{session}/next").json()
            client.post(f"/sessions/{session}/judgments", json={
                **item["pair"], "label": "FULL_SUPPORT",
            })
        export = client.get("/export").text
        records = [json.loads(line) for line in export.strip().splitlines()[1:]]
        non_sentinel = [r for r in records if not r["synthetic_zero_citation"]]
        assert {r["judge_id"] for r in non_sentinel} == {"human-1", "human-2"}

    def test_empty_store_exports_header_only(self, paths):
        client = make_client(paths)
        export = client.get("/export").text
        lines = export.strip().splitlines()
        assert len(lines) == 1
        assert json.loads(lines[0])["schema"] == "judgments"

    def test_export_filters(self, paths):
        client = make_client(paths)
        for session, topics in (("s1", ["t1"]), ("s2", ["t2"])):
            client.post("/sessions", json={
                "session_id": session, "judge_id": "human-1",
                "condition": "FROM_SCRATCH", "topic_ids": topics,
            })
            item = client.get(f"/sessions/{session}/next").json()
            client.post(f"/sessions/{session}/judgments", json={
                **item["pair"], "label": "FULL_SUPPORT",
            })
        by_topic = client.get("/export", params={"topic": "t2"}).text
        records = [json.loads(line) for line in by_topic.strip().splitlines()[1:]]
        assert {r["topic_id"] for r in records} == {"t2"}
        by_condition = client.get("/export", params={"condition": "FROM_SCRATCH"}).text
        assert len(by_condition.strip().splitlines()) > 1
        bad = client.get("/export", params={"condition": "SIDEWAYS"})
        assert bad.status_code == 422
        assert bad.json()["error"]["code"] == "invalid_condition"

    def test_state_survives_restart(self, paths):
        client = make_client(paths)
        client.post("/sessions", json={
            "session_id": "s1", "judge_id": "human-1",
            "condition": "FROM_SCRATCH", "topic_ids": ["t1"],
        })
        for _ in range(3):
            item = client.get("/sessions/s1/next").json()
            client.post("/sessions/s1/judgments", json={**item["pair"], "label": "NO_SUPPORT"})
        # New app over the same data dir: the session resumes at item 3.
        client2 = make_client(paths)
        item = client2.get("/sessions/s1/next").json()
        assert item["position"] == 3
        export = client2.get("/export", params={"judge": "human-1"}).text
        records = [json.loads(line) for line in export.strip().splitlines()[1:]]
        assert len([r for r in records if not r["synthetic_zero_citation"]]) == 3


class TestAuthAndHealth:
    def test_health(self, paths):
        client = make_client(paths)
        assert client.get("/health").json() == {"status": "ok"}

    def test_token_required_when_configured(self, paths):
        client = make_client(paths, token="secret")
        body = {"session_id": "s1", "judge_id": "human-1",
                "condition": "FROM_SCRATCH", "topic_ids": ["t1"]}
        assert client.post("/sessions", json=body).status_code == 401
        response = client.post(
            "/sessions", json=body, headers={"Authorization": "Bearer secret"}
        )
        assert response.status_code == 201
        assert client.get("/health").status_code == 200
