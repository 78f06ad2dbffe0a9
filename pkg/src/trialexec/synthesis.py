"""Teacher trajectory synthesis, two-tier filtering and SFT export."""

from __future__ import annotations

import hashlib
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from trialexec import protocol
from trialexec.agent import (
    ANSWERED,
    BACKEND_ERROR,
    EXEC,
    STEP_BUDGET,
    PromptTemplate,
    RolloutConfig,
    Step,
    Trajectory,
    render_history,
    render_transcript,
    run_rollout,
)
from trialexec.llm_io import prompts
from trialexec.llm_io.backends import (
    JUDGE_CONFIG,
    ChatBackend,
    ChatMessage,
    GenerationConfig,
    TransportError,
)
from trialexec.llm_io.judges import PASS, judge_filter, judge_passrate
from trialexec.toolenv import ToolRegistry

log = logging.getLogger(__name__)

# Pre-filter reject reasons.
CANDIDATE_FAILED = "CandidateFailed"
NO_ANSWER = "NoAnswer"
FORMAT_INVALID = "FormatInvalid"
NO_TRIAL_PHASE = "NoTrialPhase"
UNREGISTERED_TOOL = "UnregisteredTool"
# Judge-stage drop reasons.
BEHAVIOR_MISSING = "BehaviorMissing"
NOT_SOLVED = "NotSolved"
JUDGE_UNAVAILABLE = "JudgeUnavailable"

SFT_FORMAT = "trialexec-sft/1"


# -- alternate tool-call dialect -------------------------------------------

_BAR = r"[|｜]"
_SEP = r"[ _▁]"
_CALLS_RE = re.compile(
    rf"<{_BAR}tool{_SEP}calls{_SEP}begin{_BAR}>(.*?)(?:<{_BAR}tool{_SEP}calls{_SEP}end{_BAR}>|\Z)",
    re.DOTALL)
_CALL_RE = re.compile(
    rf"<{_BAR}tool{_SEP}call{_SEP}begin{_BAR}>(.*?)<{_BAR}tool{_SEP}sep{_BAR}>(.*?)"
    rf"(?:<{_BAR}tool{_SEP}call{_SEP}end{_BAR}>|\Z)",
    re.DOTALL)
_FENCE_RE = re.compile(r"^\s*(\S+)\s*```(?:json)?\s*(.*?)\s*```\s*$", re.DOTALL)


def _decode_args(text: str) -> Any:
    text = text.strip()
    for candidate in (text, text[1:-1] if text.startswith("{{") and text.endswith("}}") else None):
        if candidate is None:
            continue
        try:
            return json.loads(candidate)
        except ValueError:
            pass
    return None


def _convert_call(head: str, body: str) -> str:
    name = head.strip()
    if name == "function":
        m = _FENCE_RE.match(body)
        if m:
            name, body = m.group(1), m.group(2)
    args = _decode_args(body)
    if isinstance(args, dict):
        return protocol.CALL_OPEN + protocol.dump_call(protocol.ToolCall(name, args)) + protocol.CALL_CLOSE
    # keep the undecodable body so strict parsing reports MalformedCallBody
    return f'{protocol.CALL_OPEN}{{"name": {json.dumps(name)}, "arguments": {body.strip()}}}{protocol.CALL_CLOSE}'


def normalize_dialect(text: str) -> str:
    """Rewrite teacher output from the synthesis dialect into canonical tags.

    ``<thought>`` becomes ``<think>``; ``<|tool calls begin|>...`` blocks become
    one ``<tool_call>`` per contained call; a turn with neither a call nor an
    answer is taken as the final answer.
    """
    out = text.replace("<thought>", protocol.THINK_OPEN).replace("</thought>", protocol.THINK_CLOSE)

    def calls(m: re.Match[str]) -> str:
        return "".join(_convert_call(c.group(1), c.group(2)) for c in _CALL_RE.finditer(m.group(1)))

    out = _CALLS_RE.sub(calls, out)
    if protocol.CALL_OPEN in out or protocol.ANSWER_OPEN in out:
        return out
    think_end = out.find(protocol.THINK_CLOSE)
    head, rest = ("", out) if think_end == -1 else (
        out[:think_end + len(protocol.THINK_CLOSE)], out[think_end + len(protocol.THINK_CLOSE):])
    if not rest.strip() or (think_end == -1 and protocol.THINK_OPEN in out):
        return out
    return f"{head}{protocol.ANSWER_OPEN}{rest.strip()}{protocol.ANSWER_CLOSE}"


def synthesis_template(single_stage: bool = False) -> PromptTemplate:
    if single_stage:
        return PromptTemplate(instruction=prompts.DATA_SYNTHESIS_PROMPT, normalize=normalize_dialect)
    return PromptTemplate(instruction=prompts.SYNTHESIS_INSTRUCTION)


# -- generation ------------------------------------------------------------


@dataclass
class SynthesisJob:
    query: str
    registry: ToolRegistry
    teacher: ChatBackend
    template: PromptTemplate = field(default_factory=synthesis_template)
    config: RolloutConfig = field(default_factory=RolloutConfig)
    query_id: str | None = None
    teacher_id: str | None = None

    def validate(self) -> None:
        if not self.query.strip():
            raise ValueError("query must be non-empty")
        if len(self.registry) == 0:
            raise ValueError("job needs at least one tool")
        missing = prompts.unresolved(self.template.instruction, tool_docs="")
        for text in (self.template.trial_directive, self.template.exec_directive):
            missing |= prompts.placeholders(text)
        if missing:
            raise ValueError(f"template has unresolved placeholders: {sorted(missing)}")


@dataclass
class Candidate:
    query_id: str | None
    query: str
    trajectory: Trajectory
    teacher: str = ""
    error: str | None = None

    @property
    def answer(self) -> str | None:
        return self.trajectory.answer

    @property
    def failed(self) -> bool:
        return self.error is not None

    def to_json(self) -> dict[str, Any]:
        return {"query_id": self.query_id, "query": self.query, "teacher": self.teacher,
                "error": self.error, "trajectory": self.trajectory.to_json()}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Candidate":
        return cls(data.get("query_id"), data["query"], Trajectory.from_json(data["trajectory"]),
                   data.get("teacher", ""), data.get("error"))

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_json(), ensure_ascii=False, sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _request_final_answer(job: SynthesisJob, traj: Trajectory) -> Trajectory:
    messages = render_history(job.query, traj.steps, job.template, job.registry.docs, EXEC)
    messages.append(ChatMessage("user", prompts.FINAL_ANSWER_REQUEST))
    raw = job.teacher.complete(messages, job.config.generation)
    if job.template.normalize:
        raw = job.template.normalize(raw)
    try:
        parsed = protocol.parse_turn(raw, "strict")
    except protocol.ProtocolError:
        return traj
    if not parsed.is_answer:
        return traj
    traj.steps.append(Step(len(traj.steps) + 1, EXEC, raw, parsed.think, answer=parsed.payload.text))
    traj.answer = parsed.payload.text
    traj.termination = ANSWERED
    return traj


def synthesize(job: SynthesisJob) -> Candidate:
    """Trial stage, execution stage, then the final answer.

    Transport failures yield a failed candidate (``error`` set) rather than
    raising, so batch callers can log them without storing them as data.
    """
    job.validate()
    teacher_id = job.teacher_id or job.teacher.name
    traj = run_rollout(job.query, job.registry, job.teacher, job.template, job.config, job.query_id)
    if traj.termination == BACKEND_ERROR:
        log.warning("synthesis failed for %s: %s", job.query_id, traj.error)
        return Candidate(job.query_id, job.query, traj, teacher_id, traj.error or BACKEND_ERROR)
    if traj.termination == STEP_BUDGET:
        try:
            traj = _request_final_answer(job, traj)
        except TransportError as exc:
            return Candidate(job.query_id, job.query, traj, teacher_id, str(exc))
    return Candidate(job.query_id, job.query, traj, teacher_id)


# -- filtering -------------------------------------------------------------


@dataclass(frozen=True)
class Decision:
    keep: bool
    reason: str | None = None
    analysis: str = ""
    passrate_rationale: str = ""
    retriable: bool = False

    def to_json(self) -> dict[str, Any]:
        return {"keep": self.keep, "reason": self.reason, "analysis": self.analysis,
                "passrate_rationale": self.passrate_rationale, "retriable": self.retriable}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Decision":
        return cls(data["keep"], data.get("reason"), data.get("analysis", ""),
                   data.get("passrate_rationale", ""), data.get("retriable", False))


def structural_prefilter(candidate: Candidate, registry: ToolRegistry | None = None) -> Decision:
    """Cheap gate before any judge call; first failing gate is the reason."""
    traj = candidate.trajectory
    if candidate.failed:
        return Decision(False, CANDIDATE_FAILED, candidate.error or "")
    if not traj.answer:
        return Decision(False, NO_ANSWER)
    reward, verdicts = protocol.format_reward(traj.assistant_turns())
    if reward != 1:
        bad = sorted({v for verdict in verdicts for v in verdict.violations})
        return Decision(False, FORMAT_INVALID, ",".join(bad))
    if not any(s.action is not None for s in traj.trial_steps):
        return Decision(False, NO_TRIAL_PHASE)
    if registry is not None:
        unknown = sorted({c.name for c in traj.calls if c.name not in registry})
        if unknown:
            return Decision(False, UNREGISTERED_TOOL, ",".join(unknown))
    return Decision(True)


def _vote_configs(votes: int, base: GenerationConfig) -> list[GenerationConfig]:
    if votes == 1:
        return [base]
    return [GenerationConfig(base.temperature, base.max_tokens, seed=i) for i in range(votes)]


def filter_candidate(candidate: Candidate, behavior_judge: ChatBackend,
                     passrate_judge: ChatBackend | None = None, *,
                     registry: ToolRegistry | None = None, votes: int = 1,
                     config: GenerationConfig = JUDGE_CONFIG) -> Decision:
    """Keep iff the pre-filter passes, the behaviour judge says True and the
    pass-rate judge says Pass. Judges run only while earlier gates pass."""
    if votes < 1 or votes % 2 == 0:
        raise ValueError("votes must be a positive odd number")
    pre = structural_prefilter(candidate, registry)
    if not pre.keep:
        return pre
    passrate_judge = passrate_judge or behavior_judge
    transcript = render_transcript(candidate.trajectory)
    try:
        verdicts = [judge_filter(behavior_judge, transcript, c) for c in _vote_configs(votes, config)]
    except TransportError as exc:
        return Decision(False, JUDGE_UNAVAILABLE, str(exc), retriable=True)
    yes = sum(v.keep for v in verdicts)
    analysis = verdicts[-1].analysis if votes == 1 else f"{yes}/{votes} votes: {verdicts[-1].analysis}"
    if yes * 2 < votes:
        return Decision(False, BEHAVIOR_MISSING, analysis)
    try:
        status = judge_passrate(passrate_judge, candidate.query, candidate.answer or "", transcript, config)
    except TransportError as exc:
        return Decision(False, JUDGE_UNAVAILABLE, str(exc), retriable=True)
    if status.status != PASS:
        return Decision(False, NOT_SOLVED, analysis, status.rationale)
    return Decision(True, None, analysis, status.rationale)


# -- SFT records -------------------------------------------------------------


@dataclass
class SftRecord:
    query: str
    messages: list[ChatMessage]
    answer: str
    query_id: str | None = None
    provenance: dict[str, Any] = field(default_factory=dict)

    def check(self) -> None:
        if not self.answer:
            raise ValueError("SFT record needs a non-empty answer")
        turns = [m.content for m in self.messages if m.role == "assistant"]
        reward, _ = protocol.format_reward(turns)
        if reward != 1:
            raise ValueError("SFT record transcript is not well-formed")

    def to_json(self) -> dict[str, Any]:
        return {
            "query_id": self.query_id,
            "query": self.query,
            "messages": [{**m.to_json(), "trainable": m.role == "assistant"} for m in self.messages],
            "answer": self.answer,
            "provenance": self.provenance,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "SftRecord":
        return cls(data["query"], [ChatMessage(m["role"], m["content"]) for m in data["messages"]],
                   data["answer"], data.get("query_id"), data.get("provenance", {}))


def build_sft_record(candidate: Candidate, decision: Decision, registry: ToolRegistry) -> SftRecord:
    traj = candidate.trajectory
    messages = render_history(candidate.query, traj.steps, PromptTemplate(prompts.SYSTEM_PROMPT),
                              registry.docs)
    record = SftRecord(candidate.query, messages, traj.answer or "", candidate.query_id, {
        "teacher": candidate.teacher,
        "filter_analysis": decision.analysis,
        "passrate_rationale": decision.passrate_rationale,
        "candidate": candidate.fingerprint(),
    })
    record.check()
    return record


def export_sft(records: Sequence[SftRecord], out_dir: str | Path,
               drops: Iterable[str] = (), candidates: int | None = None) -> dict[str, Any]:
    """Write ``sft.jsonl`` and ``manifest.json``; returns the manifest.

    Each line is one chat transcript; ``trainable`` marks assistant turns as
    loss-bearing and every other turn as context.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for rec in records:
        rec.check()
        lines.append(json.dumps(rec.to_json(), ensure_ascii=False, sort_keys=True))
    body = "".join(line + "\n" for line in lines)
    (out / "sft.jsonl").write_text(body, encoding="utf-8")
    dropped = Counter(drops)
    manifest = {
        "format": SFT_FORMAT,
        "records": len(records),
        "candidates": candidates if candidates is not None else len(records) + sum(dropped.values()),
        "dropped": dict(sorted(dropped.items())),
        "dropped_total": sum(dropped.values()),
        "sha256": hashlib.sha256(body.encode("utf-8")).hexdigest(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")
    return manifest


def load_sft(path: str | Path) -> list[SftRecord]:
    with open(path, encoding="utf-8") as fh:
        return [SftRecord.from_json(json.loads(line)) for line in fh if line.strip()]
