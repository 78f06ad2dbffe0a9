"""Command-line pipeline: synth, filter, rollout, eval, analyze, similarity, export.

Exit codes: 0 success, 1 partial failure, 2 configuration or input error,
3 every backend request failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import statistics
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from trialexec.agent import (
    BACKEND_ERROR,
    PromptTemplate,
    Trajectory,
    count_tool_calls,
    render_history,
    render_transcript,
    run_rollout,
)
from trialexec.config import ConfigError, PipelineConfig
from trialexec.evaluation import (
    LOADERS,
    SOLVED,
    STATUS_TO_VERDICT,
    UNSOLVED,
    BenchmarkItem,
    EvalRecord,
    GoldSpec,
    answer_correct,
    avg_tool_calls,
    classify_error,
    correct_path_rate,
    cumulative_correctness_curve,
    doc_from_schema,
    error_distribution,
    read_records,
    sopr,
)
from trialexec.llm_io import JUDGE_CONFIG, GenerationConfig, ScriptMiss, TransportError, judge_passrate
from trialexec.rewards import GroupMember, RewardRecord, export_grpo, total_reward
from trialexec.similarity import EmbeddingCache, build_report
from trialexec.store import TrajectoryStore
from trialexec.synthesis import (
    CANDIDATE_FAILED,
    Candidate,
    Decision,
    SynthesisJob,
    build_sft_record,
    export_sft,
    filter_candidate,
    synthesize,
    synthesis_template,
)
from trialexec.toolenv import ToolDoc, ToolRegistry

log = logging.getLogger("trialexec")

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG, EXIT_BACKEND = 0, 1, 2, 3
QUERY_FORMAT = "queries"


def exit_code(ok: int, failed: int) -> int:
    if failed == 0:
        return EXIT_OK
    return EXIT_BACKEND if ok == 0 else EXIT_PARTIAL


def _write_json(path: Path, data: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                    encoding="utf-8")


def _map_ordered(fn: Callable[[Any], Any], items: Sequence[Any], workers: int) -> list[Any]:
    """Run ``fn`` concurrently; results keep input order so stores stay deterministic."""
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(fn, items))


def load_items(path: str | Path, fmt: str = QUERY_FORMAT) -> list[BenchmarkItem]:
    """Plain query files (``query_id``/``query`` plus optional ``answer`` and
    ``gold_tools``) or one of the benchmark shapes."""
    if fmt != QUERY_FORMAT:
        return list(LOADERS[fmt](path))
    items = []
    for i, rec in enumerate(read_records(path)):
        qid = str(rec.get("query_id", rec.get("id", i)))
        query = rec.get("query") or rec.get("question") or ""
        answer = rec.get("answer", rec.get("gold_answer"))
        tools = rec.get("gold_tools")
        gold = GoldSpec(qid, str(answer) if answer is not None else None,
                        frozenset(tools) if tools else None) if answer is not None or tools else None
        items.append(BenchmarkItem(qid, query, (), gold))
    return items


def load_docs(path: str | Path) -> list[ToolDoc]:
    """Tool docs from a registry file, a list of ToolDoc objects, or function schemas."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = data.get("tools", []) if isinstance(data, dict) else data
    return [ToolDoc.from_json(e) if "params" in e else doc_from_schema(e) for e in entries]


def _cap(cfg: PipelineConfig, items: list[BenchmarkItem]) -> list[BenchmarkItem]:
    return items if cfg.query_cap is None else items[:cfg.query_cap]


# -- synthesis and filtering ------------------------------------------------


def cmd_synth(cfg: PipelineConfig, queries: str | Path) -> int:
    store = TrajectoryStore(cfg.store)
    registry = cfg.load_registry()
    teacher = cfg.chat("teacher")
    template = synthesis_template(single_stage=not cfg.rollout.two_stage)
    items = _cap(cfg, load_items(queries))
    pending = [it for it in items if not store.has("candidates", it.query_id, cfg.run_id)]

    def run(item: BenchmarkItem) -> Candidate:
        job = SynthesisJob(item.query, registry, teacher, template, cfg.rollout, item.query_id)
        try:
            return synthesize(job)
        except ScriptMiss as exc:
            return Candidate(item.query_id, item.query, Trajectory(item.query, [], None, BACKEND_ERROR),
                             teacher.name, f"script miss: {exc}")

    for cand in _map_ordered(run, pending, cfg.max_concurrency):
        kind = "failures" if cand.failed else "candidates"
        store.append(kind, cand.query_id, cand.to_json(), run_id=cfg.run_id, query_id=cand.query_id)

    ok = sum(store.has("candidates", it.query_id, cfg.run_id) for it in items)
    failed = len(items) - ok
    report = {"run_id": cfg.run_id, "queries": len(items), "candidates": ok, "failures": failed}
    _write_json(cfg.out / "synth_report.json", report)
    print(f"synth: {ok}/{len(items)} candidates, {failed} failures")
    return exit_code(ok, failed)


def _judge_all(cfg: PipelineConfig, store: TrajectoryStore, registry: ToolRegistry,
               judge: Any | None) -> tuple[list[tuple[Candidate, Decision]], int]:
    """Decisions for every stored candidate; judges run only for new ones.

    Retriable decisions (judge unreachable) are returned but not stored, so
    a rerun judges them again.
    """
    candidates = [Candidate.from_json(d) for d in store.records("candidates", cfg.run_id)]
    fresh = [c for c in candidates if not store.has("judgments", c.fingerprint(), cfg.run_id)]
    if fresh and judge is None:
        raise ConfigError("unjudged candidates need a 'filter_judge' backend")

    def run(cand: Candidate) -> Decision:
        try:
            return filter_candidate(cand, judge, judge, registry=registry, votes=cfg.votes)
        except ScriptMiss as exc:
            return Decision(False, "JudgeUnavailable", f"script miss: {exc}", retriable=True)

    decided = dict(zip((c.fingerprint() for c in fresh), _map_ordered(run, fresh, cfg.max_concurrency)))
    for cand in fresh:
        decision = decided[cand.fingerprint()]
        if not decision.retriable:
            store.append("judgments", cand.fingerprint(), decision.to_json(), run_id=cfg.run_id,
                         query_id=cand.query_id)
    out, retriable = [], 0
    for cand in candidates:
        stored = store.get("judgments", cand.fingerprint(), cfg.run_id)
        decision = Decision.from_json(stored) if stored else decided[cand.fingerprint()]
        retriable += decision.retriable
        out.append((cand, decision))
    return out, retriable


def _export_sft(cfg: PipelineConfig, store: TrajectoryStore, registry: ToolRegistry,
                judged: list[tuple[Candidate, Decision]]) -> dict[str, Any]:
    records, drops = [], []
    for cand, decision in judged:
        if decision.keep:
            records.append(build_sft_record(cand, decision, registry))
        else:
            drops.append(decision.reason)
    failures = store.records("failures", cfg.run_id)
    have = {c.query_id for c, _ in judged}
    failed = [f for f in failures if f["query_id"] not in have]
    drops.extend(CANDIDATE_FAILED for _ in failed)
    return export_sft(records, cfg.out / "sft", drops, len(judged) + len(failed))


def cmd_filter(cfg: PipelineConfig) -> int:
    store = TrajectoryStore(cfg.store)
    registry = cfg.load_registry()
    judge = cfg.chat("filter_judge") if "filter_judge" in cfg.backends else None
    judged, retriable = _judge_all(cfg, store, registry, judge)
    manifest = _export_sft(cfg, store, registry, judged)
    print(f"filter: kept {manifest['records']} of {manifest['candidates']}, "
          f"{retriable} awaiting a reachable judge")
    return exit_code(len(judged) - retriable, retriable)


# -- rollouts, rewards, GRPO export -------------------------------------------


def cmd_rollout(cfg: PipelineConfig, queries: str | Path, samples: int = 1) -> int:
    """``samples`` rollouts per query under keys ``<query_id>#<i>``.

    With several samples each member gets its own seed so sampling
    backends (and scripted fingerprints) tell the group members apart.
    """
    if samples < 1:
        raise ConfigError("samples must be positive")
    store = TrajectoryStore(cfg.store)
    registry = cfg.load_registry()
    policy = cfg.chat("policy")
    items = _cap(cfg, load_items(queries))
    jobs = [(it, i) for it in items for i in range(samples)
            if not store.has("rollouts", f"{it.query_id}#{i}", cfg.run_id)]

    def run(job: tuple[BenchmarkItem, int]) -> Trajectory | None:
        item, i = job
        gen = cfg.rollout.generation
        config = cfg.rollout if samples == 1 else replace(
            cfg.rollout, generation=GenerationConfig(gen.temperature, gen.max_tokens, cfg.seed + i))
        try:
            return run_rollout(item.query, registry, policy, PromptTemplate(), config, item.query_id)
        except ScriptMiss as exc:
            log.warning("rollout %s#%d: %s", item.query_id, i, exc)
            return None

    for (item, i), traj in zip(jobs, _map_ordered(run, jobs, cfg.max_concurrency)):
        if traj is not None:
            store.append("rollouts", f"{item.query_id}#{i}", traj.to_json(), run_id=cfg.run_id,
                         query_id=item.query_id)

    keys = [f"{it.query_id}#{i}" for it in items for i in range(samples)]
    stored = [store.get("rollouts", k, cfg.run_id) for k in keys]
    ok = sum(1 for s in stored if s is not None and s["termination"] != BACKEND_ERROR)
    print(f"rollout: {ok}/{len(keys)} trajectories")
    return exit_code(ok, len(keys) - ok)


def _rollouts(cfg: PipelineConfig, store: TrajectoryStore) -> list[tuple[str, Trajectory]]:
    return [(e["key"], Trajectory.from_json(e["data"])) for e in store.entries("rollouts", cfg.run_id)]


def _reward(cfg: PipelineConfig, store: TrajectoryStore, key: str, traj: Trajectory,
            judge: Any | None) -> RewardRecord:
    stored = store.get("rewards", key, cfg.run_id)
    if stored:
        return RewardRecord.from_json(stored)
    if judge is None:
        raise ConfigError("unrewarded rollouts need a 'reward_judge' backend")
    try:
        record = total_reward(traj, judge, key)
    except ScriptMiss as exc:
        return RewardRecord(key, 0, None, f"script miss: {exc}", pending=True)
    if not record.pending:
        store.append("rewards", key, record.to_json(), run_id=cfg.run_id, query_id=traj.query_id)
    return record


def export_grpo_from_store(cfg: PipelineConfig) -> dict[str, Any]:
    store = TrajectoryStore(cfg.store)
    registry = cfg.load_registry()
    judge = cfg.chat("reward_judge") if "reward_judge" in cfg.backends else None
    groups: dict[str, tuple[str, list[GroupMember]]] = {}
    for key, traj in _rollouts(cfg, store):
        reward = _reward(cfg, store, key, traj, judge)
        messages = render_history(traj.query, traj.steps, PromptTemplate(), registry.docs)
        member = GroupMember(key, traj, reward, [m.to_json() for m in messages])
        groups.setdefault(traj.query_id or key, (traj.query, []))[1].append(member)
    rows = [(qid, query, members) for qid, (query, members) in groups.items()]
    return export_grpo(rows, cfg.out / "grpo", group_size=cfg.group_size, kl_beta=cfg.kl_beta,
                       epsilon=cfg.epsilon, trainer=cfg.trainer)


def cmd_export(cfg: PipelineConfig, what: str) -> int:
    if what == "sft":
        store = TrajectoryStore(cfg.store)
        registry = cfg.load_registry()
        judge = cfg.chat("filter_judge") if "filter_judge" in cfg.backends else None
        judged, retriable = _judge_all(cfg, store, registry, judge)
        manifest = _export_sft(cfg, store, registry, judged)
        print(f"export sft: {manifest['records']} records")
        return exit_code(len(judged) - retriable, retriable)
    manifest = export_grpo_from_store(cfg)
    blocked = len(manifest["blocked"])
    print(f"export grpo: {manifest['groups']} groups, {blocked} withheld")
    return exit_code(manifest["groups"], blocked)


# -- evaluation and analysis ------------------------------------------------


def _trajectory_for(cfg: PipelineConfig, store: TrajectoryStore, item: BenchmarkItem,
                    policy_factory: Callable[[], Any]) -> Trajectory | None:
    stored = store.get("rollouts", f"{item.query_id}#0", cfg.run_id)
    if stored:
        return Trajectory.from_json(stored)
    try:
        traj = run_rollout(item.query, cfg.load_registry(), policy_factory(), PromptTemplate(),
                           cfg.rollout, item.query_id)
    except ScriptMiss as exc:
        log.warning("rollout %s: %s", item.query_id, exc)
        return None
    store.append("rollouts", f"{item.query_id}#0", traj.to_json(), run_id=cfg.run_id,
                 query_id=item.query_id)
    return traj


def evaluate_item(cfg: PipelineConfig, item: BenchmarkItem, traj: Trajectory | None, mode: str,
                  evaluator: Any | None) -> EvalRecord:
    if traj is None:
        return EvalRecord(item.query_id, flag="no_trajectory")
    calls = count_tool_calls(traj)
    gold = item.gold
    recall = correct_path_rate(traj, gold.gold_tools) if gold and gold.gold_tools else None
    if mode == "containment":
        if gold is None or gold.gold_answer is None:
            return EvalRecord(item.query_id, tool_calls=calls, path_recall=recall, flag="missing_gold")
        return EvalRecord(item.query_id, contains_gold=answer_correct(traj.answer or "", gold.gold_answer),
                          tool_calls=calls, path_recall=recall)
    if not traj.answer:
        return EvalRecord(item.query_id, UNSOLVED, tool_calls=calls, path_recall=recall)
    if evaluator is None:
        raise ConfigError("sopr mode needs an 'evaluator' backend")
    try:
        verdict = judge_passrate(evaluator, item.query, traj.answer, render_transcript(traj), JUDGE_CONFIG)
    except (TransportError, ScriptMiss) as exc:
        log.warning("evaluator unavailable for %s: %s", item.query_id, exc)
        return EvalRecord(item.query_id, tool_calls=calls, path_recall=recall, flag="judge_unavailable")
    return EvalRecord(item.query_id, STATUS_TO_VERDICT[verdict.status], tool_calls=calls,
                      path_recall=recall)


def summarize(records: Sequence[EvalRecord], mode: str) -> dict[str, Any]:
    scored = [r for r in records if r.flag is None]
    summary: dict[str, Any] = {"mode": mode, "records": len(records), "scored": len(scored),
                               "flagged": len(records) - len(scored), "score": None}
    if scored:
        if mode == "sopr":
            summary["score"] = sopr([r.verdict for r in scored])
        else:
            summary["score"] = sum(bool(r.contains_gold) for r in scored) / len(scored)
        summary["avg_tool_calls"] = statistics.fmean(r.tool_calls for r in scored)
        recalls = [r.path_recall for r in scored if r.path_recall is not None]
        summary["correct_path_rate"] = statistics.fmean(recalls) if recalls else None
    return summary


def format_table(rows: Iterable[tuple[str, Any]]) -> str:
    rows = [(k, "-" if v is None else (f"{v:.4f}" if isinstance(v, float) else str(v)))
            for k, v in rows]
    width = max((len(k) for k, _ in rows), default=0)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows) + "\n"


def cmd_eval(cfg: PipelineConfig, benchmark: str | Path, fmt: str, mode: str) -> int:
    items = _cap(cfg, load_items(benchmark, fmt))
    if not items:
        raise ConfigError(f"benchmark {benchmark} has no records")
    store = TrajectoryStore(cfg.store)
    evaluator = cfg.chat("evaluator") if mode == "sopr" and "evaluator" in cfg.backends else None
    policy: list[Any] = []

    def get_policy() -> Any:
        if not policy:
            policy.append(cfg.chat("policy"))
        return policy[0]

    trajs = [_trajectory_for(cfg, store, it, get_policy) for it in items]
    records = _map_ordered(lambda pair: evaluate_item(cfg, pair[0], pair[1], mode, evaluator),
                           list(zip(items, trajs)), cfg.max_concurrency)
    for rec in records:
        if rec.flag is None:
            store.append("evals", f"{mode}:{rec.query_id}", rec.to_json(), run_id=cfg.run_id,
                         query_id=rec.query_id)
    summary = summarize(records, mode)
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / f"eval_{mode}.jsonl").write_text(
        "".join(json.dumps(r.to_json(), sort_keys=True) + "\n" for r in records), encoding="utf-8")
    _write_json(cfg.out / f"eval_{mode}_summary.json", summary)
    table = format_table(summary.items())
    (cfg.out / f"eval_{mode}_summary.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    return exit_code(summary["scored"], summary["flagged"])


def _gold_by_query(benchmark: str | Path | None, fmt: str) -> dict[str, GoldSpec]:
    if benchmark is None:
        return {}
    return {it.query_id: it.gold for it in load_items(benchmark, fmt) if it.gold is not None}


def _solved(store: TrajectoryStore, cfg: PipelineConfig, query_id: str | None) -> bool | None:
    recs = store.by_query("evals", query_id, cfg.run_id) if query_id else []
    if not recs:
        return None
    return any(r.get("verdict") == SOLVED or r.get("contains_gold") is True for r in recs)


def cmd_analyze(cfg: PipelineConfig, mode: str, benchmark: str | Path | None = None,
                fmt: str = QUERY_FORMAT, error_mode: str | None = None,
                max_step: int | None = None) -> int:
    store = TrajectoryStore(cfg.store)
    rollouts = _rollouts(cfg, store)
    if not rollouts:
        raise ConfigError("the store has no rollouts for this run")
    golds = _gold_by_query(benchmark, fmt)
    report: dict[str, Any] = {"mode": mode, "run_id": cfg.run_id}
    status = EXIT_OK

    if mode == "errors":
        error_mode = error_mode or cfg.error_mode
        role = "error_judge" if "error_judge" in cfg.backends else "evaluator"
        judge = cfg.chat(role) if error_mode == "judge" else None
        entries = []
        for key, traj in rollouts:
            if _solved(store, cfg, traj.query_id):
                continue
            gold = golds.get(traj.query_id or "")
            cls = classify_error(traj.query, (gold.gold_answer if gold else None) or "", traj,
                                 judge, mode=error_mode,
                                 gold_tools=gold.gold_tools if gold else None)
            entries.append({"key": key, "query_id": traj.query_id, "class": cls})
        report.update(error_mode=error_mode, entries=entries,
                      distribution=error_distribution(e["class"] for e in entries))
        if any(e["class"] == "Unclassified" for e in entries):
            status = EXIT_PARTIAL
    elif mode == "paths":
        if not golds:
            raise ConfigError("paths mode needs a benchmark with gold tools")
        entries = [{"key": key, "query_id": t.query_id,
                    "recall": correct_path_rate(t, golds[t.query_id].gold_tools)}
                   for key, t in rollouts
                   if t.query_id in golds and golds[t.query_id].gold_tools]
        report.update(entries=entries, correct_path_rate=statistics.fmean(
            e["recall"] for e in entries) if entries else None)
    elif mode == "calls":
        report.update(entries=[{"key": k, "tool_calls": count_tool_calls(t)} for k, t in rollouts],
                      avg_tool_calls=avg_tool_calls([t for _, t in rollouts]))
    elif mode == "curve":
        pairs = []
        for _, t in rollouts:
            solved = _solved(store, cfg, t.query_id)
            if solved is None:
                gold = golds.get(t.query_id or "")
                if gold is None or gold.gold_answer is None:
                    continue
                solved = answer_correct(t.answer or "", gold.gold_answer)
            pairs.append((count_tool_calls(t), solved))
        if not pairs:
            raise ConfigError("curve mode needs eval records or gold answers")
        top = max_step if max_step is not None else max(c for c, _ in pairs)
        report.update(records=len(pairs), series=cumulative_correctness_curve(pairs, top))
    else:
        raise ConfigError(f"unknown analysis mode {mode!r}")

    _write_json(cfg.out / f"analysis_{mode}.json", report)
    print(json.dumps({k: v for k, v in report.items() if k not in ("entries", "series")},
                     sort_keys=True))
    return status


def cmd_similarity(cfg: PipelineConfig, train: str | Path, test: str | Path,
                   benchmark: str | Path | None = None, fmt: str = QUERY_FORMAT) -> int:
    backend = cfg.embedding_backend()
    cache = EmbeddingCache(backend, cfg.embedding_cache)
    store = TrajectoryStore(cfg.store)
    golds = _gold_by_query(benchmark, fmt)
    query_tools = {qid: g.gold_tools for qid, g in golds.items() if g.gold_tools}
    report = build_report(load_docs(test), load_docs(train), cache, thresholds=cfg.thresholds,
                          mode=cfg.similarity_mode, trajectories=[t for _, t in _rollouts(cfg, store)],
                          query_tools=query_tools)
    cfg.out.mkdir(parents=True, exist_ok=True)
    report.write(cfg.out / "similarity_report.json")
    print(format_table((f"{t.name} [{t.group}]", t.score) for t in report.tools), end="")
    return EXIT_OK


# -- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trialexec", description=__doc__.splitlines()[0])
    p.add_argument("-c", "--config", required=True, help="pipeline YAML file")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate candidate trajectories with the teacher")
    s.add_argument("queries")
    sub.add_parser("filter", help="judge stored candidates and export SFT data")
    s = sub.add_parser("rollout", help="run the policy on queries and store trajectories")
    s.add_argument("queries")
    s.add_argument("-n", "--samples", type=int, default=1, help="rollouts per query")
    s = sub.add_parser("eval", help="score trajectories on a benchmark")
    s.add_argument("benchmark")
    s.add_argument("--format", default=QUERY_FORMAT, choices=[QUERY_FORMAT, *LOADERS])
    s.add_argument("--mode", default="sopr", choices=["sopr", "containment"])
    s = sub.add_parser("analyze", help="error, path, call-count, or curve reports")
    s.add_argument("mode", choices=["errors", "paths", "calls", "curve"])
    s.add_argument("--benchmark")
    s.add_argument("--format", default=QUERY_FORMAT, choices=[QUERY_FORMAT, *LOADERS])
    s.add_argument("--error-mode", choices=["judge", "heuristic"])
    s.add_argument("--max-step", type=int)
    s = sub.add_parser("similarity", help="tool familiarity report")
    s.add_argument("train_docs")
    s.add_argument("test_docs")
    s.add_argument("--benchmark")
    s.add_argument("--format", default=QUERY_FORMAT, choices=[QUERY_FORMAT, *LOADERS])
    s = sub.add_parser("export", help="write SFT or GRPO training files")
    s.add_argument("what", choices=["sft", "grpo"])
    return p


def run(args: argparse.Namespace) -> int:
    cfg = PipelineConfig.load(args.config)
    if args.command == "synth":
        return cmd_synth(cfg, args.queries)
    if args.command == "filter":
        return cmd_filter(cfg)
    if args.command == "rollout":
        return cmd_rollout(cfg, args.queries, args.samples)
    if args.command == "eval":
        return cmd_eval(cfg, args.benchmark, args.format, args.mode)
    if args.command == "analyze":
        return cmd_analyze(cfg, args.mode, args.benchmark, args.format, args.error_mode,
                           args.max_step)
    if args.command == "similarity":
        return cmd_similarity(cfg, args.train_docs, args.test_docs, args.benchmark, args.format)
    return cmd_export(cfg, args.what)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TransportError as exc:
        print(f"backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
