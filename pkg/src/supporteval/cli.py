"""Command-line entry points for the support-assessment pipeline.

Subcommands cover the whole flow: prepare-corpus, ingest-check, judge,
score, agree, sample, serve, and export. Data goes to stdout or the
--out file; diagnostics go to stderr. Exit codes: 0 success, 1 failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import corpus, ingest, metrics, stats
from .cache import JudgmentCache
from .judge import CountingBackend, JudgeConfig, judge_run
from .model import Condition, SupportJudgment
from .store import AnnotationStore

logger = logging.getLogger("supporteval")


def _say(message: str) -> None:
    print(message, file=sys.stderr)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def cmd_prepare_corpus(args: argparse.Namespace) -> int:
    docs = ingest.load_documents(args.docs)
    kept, removals = corpus.lsh_dedup(
        docs,
        bands=args.bands,
        rows=args.rows,
        min_jaccard=args.min_jaccard,
        gram=args.gram,
        seed=args.minhash_seed,
    )
    chunks = []
    for doc in kept:
        chunks.extend(corpus.chunk_document(doc, window=args.window, stride=args.stride))
    ingest.write_passages(args.out_passages, chunks)
    ingest.write_dedup_report(args.out_dedup, removals)
    _say(
        f"prepare-corpus: {len(docs)} documents in, {len(removals)} near-duplicates "
        f"removed, {len(chunks)} passages out (splitter v{corpus.SPLITTER_VERSION})"
    )
    return 0


def cmd_ingest_check(args: argparse.Namespace) -> int:
    dataset, report = ingest.load_dataset(args.topics, args.passages, args.runs)
    if args.out:
        ingest.write_validation_report(args.out, report)
    else:
        for issue in report.issues:
            sys.stdout.write(
                json.dumps(
                    {"location": issue.location, "reason_code": issue.reason_code, "detail": issue.detail},
                    sort_keys=True,
                )
                + "\n"
            )
    _say(
        f"ingest-check: {len(dataset.runs)} answers accepted, "
        f"{report.quarantined_count} quarantined, {report.sentence_count} sentences "
        f"({report.zero_citation_count} uncited), "
        f"{report.unresolved_citation_count} unresolved citations"
    )
    return 0


def _judge_config(args: argparse.Namespace) -> JudgeConfig:
    if args.judge == "mock":
        return JudgeConfig(
            model="mock",
            max_retries=args.max_retries,
            concurrency=args.concurrency,
            cache_path=args.cache,
        )
    if not args.endpoint or not args.model:
        raise ValueError("--judge http requires --endpoint and --model")
    return JudgeConfig(
        model=args.model,
        endpoint=args.endpoint,
        temperature=args.temperature,
        max_retries=args.max_retries,
        concurrency=args.concurrency,
        cache_path=args.cache,
    )


def cmd_judge(args: argparse.Namespace) -> int:
    dataset, report = ingest.load_dataset(args.topics, args.passages, args.runs)
    if report.quarantined_count:
        _say(f"judge: {report.quarantined_count} run records quarantined (see ingest-check)")
    config = _judge_config(args)
    backend = CountingBackend(config.build_backend())
    cache = JudgmentCache(config.cache_path) if config.cache_path else None
    judgments: list[SupportJudgment] = []
    synthetic = 0
    try:
        answers = sorted(dataset.runs, key=lambda a: (a.topic_id, a.run_id))
        for answer in answers:
            for judgment in judge_run(dataset, answer, config, k=args.k, backend=backend, cache=cache):
                judgments.append(judgment)
                synthetic += judgment.synthetic_zero_citation
    finally:
        if cache is not None:
            cache.close()
    ingest.write_judgments(args.out, judgments)
    abstained = sum(1 for j in judgments if j.abstained)
    dispatched = backend.calls
    cached = len(judgments) - synthetic - dispatched
    _say(
        f"judge: {len(judgments)} judgments ({dispatched} dispatched, {cached} cache hits, "
        f"{synthetic} synthetic zero-citation, {abstained} abstained)"
    )
    return 0


def _select_judge(judgments: list[SupportJudgment], requested: str | None) -> list[SupportJudgment]:
    available = sorted({j.judge_id for j in judgments})
    if requested is not None:
        if requested not in available:
            raise ValueError(f"judge {requested!r} not in file (available: {available})")
        return [j for j in judgments if j.judge_id == requested]
    if len(available) > 1:
        raise ValueError(f"file contains multiple judges {available}; pass --judge")
    return judgments


def cmd_score(args: argparse.Namespace) -> int:
    dataset, _ = ingest.load_dataset(args.topics, args.passages, args.runs)
    judgments = _select_judge(ingest.load_judgments(args.judgments), args.judge)
    reports = []
    for run_id in sorted({a.run_id for a in dataset.runs}):
        try:
            reports.append(metrics.score_run(run_id, dataset, judgments, k=args.k))
        except metrics.ScoringError as exc:
            _say(f"score: skipping run {run_id!r}: {exc}")
    if not reports:
        raise ValueError("no run could be scored from the given judgments")
    _emit(metrics.format_leaderboard(reports), args.out)
    _say(f"score: leaderboard over {len(reports)} runs")
    return 0


def _json_float(value: float) -> float | None:
    return None if math.isnan(value) else value


def cmd_agree(args: argparse.Namespace) -> int:
    judgments_a = ingest.load_judgments(args.judgments_a)
    judgments_b = ingest.load_judgments(args.judgments_b)
    report = stats.agreement_report(judgments_a, judgments_b)
    payload: dict = {
        "pair_count": report.pair_count,
        "exact_agreement_rate": report.exact_agreement_rate,
        "kappa": _json_float(report.kappa),
        "matrix": {
            "labels": [label.value for label in stats.LABEL_ORDER],
            "counts": [list(row) for row in report.matrix.counts],
            "percentages": [list(row) for row in report.matrix.percentages()],
        },
        "uncompared": {
            "only_in_a": report.only_in_a,
            "only_in_b": report.only_in_b,
            "abstained_a": report.abstained_a,
            "abstained_b": report.abstained_b,
        },
    }
    if args.topics and args.passages and args.runs:
        dataset, _ = ingest.load_dataset(args.topics, args.passages, args.runs)
        scores_a = metrics.run_scores_by_judge(dataset, judgments_a, k=args.k)
        scores_b = metrics.run_scores_by_judge(dataset, judgments_b, k=args.k)
        taus = {}
        for metric in ("weighted_precision", "weighted_recall"):
            xs = {run: s[metric] for run, s in scores_a.items()}
            ys = {run: s[metric] for run, s in scores_b.items()}
            try:
                taus[metric] = _json_float(stats.kendall_tau(xs, ys))
            except stats.StatsError:
                taus[metric] = None
        payload["kendall_tau"] = taus
        payload["scatter"] = _scatter_points(dataset, judgments_a, judgments_b, args.k)
    _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out)
    _say(
        f"agree: {report.pair_count} shared pairs, exact agreement "
        f"{report.exact_agreement_rate:.3f}, kappa {report.kappa:.3f}"
    )
    return 0


def _scatter_points(dataset, judgments_a, judgments_b, k: int) -> list[dict]:
    """Run-level, topic-level, and individual score points for plotting."""
    by_answer_a = metrics.group_judgments_by_answer(judgments_a)
    by_answer_b = metrics.group_judgments_by_answer(judgments_b)
    individual: list[dict] = []
    by_topic: dict[str, list[tuple[float, float, float, float]]] = {}
    by_run: dict[str, list[tuple[float, float, float, float]]] = {}
    for answer in sorted(dataset.runs, key=lambda a: (a.topic_id, a.run_id)):
        key = (answer.topic_id, answer.run_id)
        if key not in by_answer_a or key not in by_answer_b:
            continue
        try:
            score_a = metrics.score_answer(answer, by_answer_a[key], k)
            score_b = metrics.score_answer(answer, by_answer_b[key], k)
        except metrics.ScoringError:
            continue
        values = (
            score_a.weighted_precision, score_a.weighted_recall,
            score_b.weighted_precision, score_b.weighted_recall,
        )
        individual.append(
            {
                "kind": "individual",
                "topic_id": answer.topic_id,
                "run_id": answer.run_id,
                "precision_a": values[0], "recall_a": values[1],
                "precision_b": values[2], "recall_b": values[3],
            }
        )
        by_topic.setdefault(answer.topic_id, []).append(values)
        by_run.setdefault(answer.run_id, []).append(values)

    def mean_points(groups: dict[str, list[tuple[float, float, float, float]]], kind: str, field: str) -> list[dict]:
        points = []
        for name in sorted(groups):
            rows = groups[name]
            means = [sum(row[i] for row in rows) / len(rows) for i in range(4)]
            points.append(
                {
                    "kind": kind,
                    field: name,
                    "precision_a": means[0], "recall_a": means[1],
                    "precision_b": means[2], "recall_b": means[3],
                }
            )
        return points

    return (
        mean_points(by_run, "run", "run_id")
        + mean_points(by_topic, "topic", "topic_id")
        + individual
    )


def cmd_sample(args: argparse.Namespace) -> int:
    judgments_a = ingest.load_judgments(args.judgments_a)
    judgments_b = ingest.load_judgments(args.judgments_b)
    keys = stats.sample_disagreements(
        judgments_a, judgments_b, per_topic=args.per_topic, seed=args.seed
    )
    records = [
        {"topic_id": t, "run_id": r, "sentence_index": i, "passage_id": p}
        for t, r, i, p in keys
    ]
    if args.out:
        ingest.write_jsonl_file(args.out, "disagreement_sample", records)
    else:
        for record in records:
            sys.stdout.write(json.dumps(record, sort_keys=True) + "\n")
    _say(f"sample: {len(records)} disagreement pairs (per-topic cap {args.per_topic})")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    token = os.environ.get(args.token_env) if args.token_env else None
    config = ServiceConfig(
        topics_path=args.topics,
        passages_path=args.passages,
        run_paths=args.runs,
        data_dir=args.data_dir,
        auto_judgments_path=args.auto_judgments,
        token=token,
        citations_per_sentence=args.k,
    )
    app = create_app(config)
    _say(f"serve: listening on {args.host}:{args.port} (data dir {args.data_dir})")
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except (OSError, SystemExit) as exc:
        _say(f"serve: failed to bind {args.host}:{args.port}: {exc}")
        return 1
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    condition = Condition(args.condition) if args.condition else None
    with AnnotationStore(args.data_dir) as store:
        judgments = store.latest_judgments(
            judge_id=args.judge, condition=condition, topic_id=args.topic
        )
    if args.out:
        ingest.write_judgments(args.out, judgments)
    else:
        import io

        buffer = io.StringIO()
        ingest._write_jsonl(buffer, "judgments", (ingest.judgment_record(j) for j in judgments))
        sys.stdout.write(buffer.getvalue())
    _say(f"export: {len(judgments)} judgments")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="supporteval",
        description="Support assessment for retrieval-augmented generation answers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    prepare = sub.add_parser("prepare-corpus", help="chunk documents and drop near-duplicates")
    prepare.add_argument("--docs", required=True, help="document file (docid/title/body records)")
    prepare.add_argument("--out-passages", required=True)
    prepare.add_argument("--out-dedup", required=True)
    prepare.add_argument("--window", type=int, default=corpus.DEFAULT_WINDOW)
    prepare.add_argument("--stride", type=int, default=corpus.DEFAULT_STRIDE)
    prepare.add_argument("--gram", type=int, default=corpus.DEFAULT_SHINGLE_GRAM)
    prepare.add_argument("--bands", type=int, default=corpus.DEFAULT_BANDS)
    prepare.add_argument("--rows", type=int, default=corpus.DEFAULT_ROWS)
    prepare.add_argument("--min-jaccard", type=float, default=corpus.DEFAULT_MIN_JACCARD)
    prepare.add_argument("--minhash-seed", type=int, default=corpus.DEFAULT_SEED)
    prepare.set_defaults(func=cmd_prepare_corpus)

    check = sub.add_parser("ingest-check", help="validate topics, passages, and runs")
    check.add_argument("--topics", required=True)
    check.add_argument("--passages", required=True)
    check.add_argument("--runs", required=True, nargs="+")
    check.add_argument("--out")
    check.set_defaults(func=cmd_ingest_check)

    judge = sub.add_parser("judge", help="produce automatic support judgments")
    judge.add_argument("--topics", required=True)
    judge.add_argument("--passages", required=True)
    judge.add_argument("--runs", required=True, nargs="+")
    judge.add_argument("--out", required=True)
    judge.add_argument("--judge", choices=("mock", "http"), default="mock")
    judge.add_argument("--endpoint", help="chat-completion URL for --judge http")
    judge.add_argument("--model", help="model name for --judge http")
    judge.add_argument("--temperature", type=float, default=0.0)
    judge.add_argument("--max-retries", type=int, default=3)
    judge.add_argument("--concurrency", type=int, default=4)
    judge.add_argument("--cache", help="append-only response cache path")
    judge.add_argument("--k", type=int, default=1, help="citations judged per sentence")
    judge.set_defaults(func=cmd_judge)

    score = sub.add_parser("score", help="weighted precision/recall leaderboard")
    score.add_argument("--topics", required=True)
    score.add_argument("--passages", required=True)
    score.add_argument("--runs", required=True, nargs="+")
    score.add_argument("--judgments", required=True)
    score.add_argument("--judge", help="judge_id to score when the file has several")
    score.add_argument("--k", type=int, default=1)
    score.add_argument("--out")
    score.set_defaults(func=cmd_score)

    agree = sub.add_parser("agree", help="agreement report between two judgment files")
    agree.add_argument("--judgments-a", required=True)
    agree.add_argument("--judgments-b", required=True)
    agree.add_argument("--topics", help="with --passages/--runs, adds tau and scatter data")
    agree.add_argument("--passages")
    agree.add_argument("--runs", nargs="+")
    agree.add_argument("--k", type=int, default=1)
    agree.add_argument("--out")
    agree.set_defaults(func=cmd_agree)

    sample = sub.add_parser("sample", help="seeded sample of judge disagreements")
    sample.add_argument("--judgments-a", required=True)
    sample.add_argument("--judgments-b", required=True)
    sample.add_argument("--per-topic", type=int, default=15)
    sample.add_argument("--seed", type=int, required=True,
                        help="sampling seed (required; sampling never runs unseeded)")
    sample.add_argument("--out")
    sample.set_defaults(func=cmd_sample)

    serve = sub.add_parser("serve", help="run the annotation service")
    serve.add_argument("--topics", required=True)
    serve.add_argument("--passages", required=True)
    serve.add_argument("--runs", required=True, nargs="+")
    serve.add_argument("--data-dir", required=True)
    serve.add_argument("--auto-judgments", help="AUTOMATIC judgments for post-editing sessions")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8400)
    serve.add_argument("--k", type=int, default=1)
    serve.add_argument("--token-env", help="env var holding the bearer token to require")
    serve.set_defaults(func=cmd_serve)

    export = sub.add_parser("export", help="export judgments from a service data dir")
    export.add_argument("--data-dir", required=True)
    export.add_argument("--judge")
    export.add_argument("--condition", choices=[c.value for c in Condition])
    export.add_argument("--topic")
    export.add_argument("--out")
    export.set_defaults(func=cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface every failure with a diagnostic, not a traceback
        _say(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
