"""Reasoning-action-observation rollouts against a tool registry.

Two-stage mode first runs a trial stage (tool probing, closed by the model
answering, or by the trial budget) and then an execution stage whose prompt
carries the trial steps as history. Single-stage mode runs one loop and labels
phases afterwards from a boundary marker in the reasoning text.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from trialexec import protocol
from trialexec.llm_io import prompts
from trialexec.llm_io.backends import ChatBackend, ChatMessage, GenerationConfig, TransportError
from trialexec.protocol import FinalAnswer, ParsedTurn, ProtocolError, ToolCall
from trialexec.toolenv import Observation, ToolDoc, ToolRegistry

log = logging.getLogger(__name__)

TRIAL, EXEC = "trial", "exec"

ANSWERED = "Answered"
STEP_BUDGET = "StepBudgetExhausted"
CONTEXT_BUDGET = "ContextBudgetExhausted"
BACKEND_ERROR = "BackendError"
MALFORMED = "MalformedTurn"
TERMINATIONS = (ANSWERED, STEP_BUDGET, CONTEXT_BUDGET, BACKEND_ERROR, MALFORMED)

CHARS_PER_TOKEN = 4
DEFAULT_BOUNDARY = r"(?i)\bexecution (?:phase|stage)\b"


@dataclass(frozen=True)
class Step:
    index: int
    phase: str
    raw: str = ""
    think: str | None = None
    action: ToolCall | None = None
    observation: Observation | None = None
    answer: str | None = None
    rejected: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError("step index must be positive")
        if self.phase not in (TRIAL, EXEC):
            raise ValueError(f"unknown phase {self.phase!r}")
        if (self.action is None) == (self.answer is None):
            raise ValueError("a step carries exactly one of action and answer")
        if (self.action is None) != (self.observation is None):
            raise ValueError("action and observation come together")

    @property
    def turn(self) -> ParsedTurn:
        payload = self.action if self.action is not None else FinalAnswer(self.answer)
        return ParsedTurn(payload, self.think)

    def to_json(self, timing: bool = False) -> dict[str, Any]:
        obs = None
        if self.observation is not None:
            obs = self.observation.to_json()
            if timing:
                obs["elapsed"] = round(self.observation.elapsed, 6)
        return {
            "index": self.index,
            "phase": self.phase,
            "think": self.think,
            "action": self.action.to_json() if self.action is not None else None,
            "observation": obs,
            "answer": self.answer,
            "raw": self.raw,
            "rejected": list(self.rejected),
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Step":
        action = data.get("action")
        obs = data.get("observation")
        return cls(
            index=data["index"],
            phase=data["phase"],
            raw=data.get("raw", ""),
            think=data.get("think"),
            action=ToolCall(action["name"], action["arguments"]) if action else None,
            observation=Observation.from_json(obs) if obs else None,
            answer=data.get("answer"),
            rejected=tuple(data.get("rejected", ())),
        )


@dataclass
class Trajectory:
    query: str
    steps: list[Step] = field(default_factory=list)
    answer: str | None = None
    termination: str = STEP_BUDGET
    query_id: str | None = None
    unparsed: tuple[str, ...] = ()
    stage_markers: tuple[str, ...] = ()
    error: str | None = None

    @property
    def trial_steps(self) -> list[Step]:
        return [s for s in self.steps if s.phase == TRIAL]

    @property
    def exec_steps(self) -> list[Step]:
        return [s for s in self.steps if s.phase == EXEC]

    @property
    def calls(self) -> list[ToolCall]:
        return [s.action for s in self.steps if s.action is not None]

    def assistant_turns(self) -> list[str]:
        """Every assistant output that belongs to the trajectory, in order."""
        turns: list[str] = []
        for s in self.steps:
            turns.extend(s.rejected)
            turns.append(s.raw or protocol.render_turn(s.turn))
        turns.extend(self.unparsed)
        return turns

    def check(self) -> None:
        seen_exec = False
        for i, s in enumerate(self.steps, 1):
            if s.index != i:
                raise ValueError("step indices must be 1..n")
            if s.phase == EXEC:
                seen_exec = True
            elif seen_exec:
                raise ValueError("trial step after an exec step")
            if s.answer is not None and i != len(self.steps):
                raise ValueError("answer only on the final step")
        if (self.termination == ANSWERED) != (self.answer is not None):
            raise ValueError("Answered iff an answer is present")

    def to_json(self, timing: bool = False) -> dict[str, Any]:
        return {
            "query_id": self.query_id,
            "query": self.query,
            "steps": [s.to_json(timing) for s in self.steps],
            "answer": self.answer,
            "termination": self.termination,
            "unparsed": list(self.unparsed),
            "stage_markers": list(self.stage_markers),
            "error": self.error,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Trajectory":
        return cls(
            query=data["query"],
            steps=[Step.from_json(s) for s in data.get("steps", [])],
            answer=data.get("answer"),
            termination=data.get("termination", STEP_BUDGET),
            query_id=data.get("query_id"),
            unparsed=tuple(data.get("unparsed", ())),
            stage_markers=tuple(data.get("stage_markers", ())),
            error=data.get("error"),
        )


@dataclass(frozen=True)
class RolloutConfig:
    max_trial_steps: int = 8
    max_total_steps: int = 20
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    two_stage: bool = True
    context_budget_tokens: int = 8192
    boundary_pattern: str = DEFAULT_BOUNDARY

    def __post_init__(self) -> None:
        if self.max_trial_steps < 1 or self.max_total_steps < 1:
            raise ValueError("step budgets must be positive")
        if self.max_trial_steps > self.max_total_steps:
            raise ValueError("max_trial_steps must not exceed max_total_steps")


@dataclass(frozen=True)
class PromptTemplate:
    """System-message recipe: instruction (with ``$tool_docs``) plus stage directives."""

    instruction: str = prompts.SYSTEM_PROMPT
    trial_directive: str = prompts.TRIAL_STAGE_DIRECTIVE
    exec_directive: str = prompts.EXEC_STAGE_DIRECTIVE
    normalize: Callable[[str], str] | None = None

    def system_text(self, tool_docs: Sequence[ToolDoc], stage: str | None = None) -> str:
        text = prompts.render(self.instruction, tool_docs=render_tool_docs(tool_docs))
        if stage == TRIAL:
            text += "\n\n" + self.trial_directive
        elif stage == EXEC:
            text += "\n\n" + self.exec_directive
        return text


def render_tool_docs(docs: Iterable[ToolDoc]) -> str:
    return "\n".join(json.dumps(d.function_schema(), ensure_ascii=False) for d in docs)


def render_history(query: str, steps: Sequence[Step], template: PromptTemplate,
                   tool_docs: Sequence[ToolDoc] = (), stage: str | None = None) -> list[ChatMessage]:
    messages = [ChatMessage("system", template.system_text(tool_docs, stage)),
                ChatMessage("user", query)]
    for step in steps:
        messages.append(ChatMessage("assistant", protocol.render_turn(step.turn)))
        if step.observation is not None:
            messages.append(ChatMessage.tool(step.observation.text))
    return messages


def estimate_tokens(messages: Sequence[ChatMessage]) -> int:
    return math.ceil(sum(len(m.content) for m in messages) / CHARS_PER_TOKEN)


def count_tool_calls(trajectory: Trajectory) -> int:
    return sum(1 for s in trajectory.steps if s.action is not None)


def render_transcript(trajectory: Trajectory) -> str:
    """Plain-text turn transcript for judges."""
    lines = [f"User: {trajectory.query}"]
    for step in trajectory.steps:
        lines.append(f"Assistant: {protocol.render_turn(step.turn)}")
        if step.observation is not None:
            lines.append(f"Tool: {protocol.wrap_observation(step.observation.text)}")
    for raw in trajectory.unparsed:
        lines.append(f"Assistant: {raw}")
    return "\n".join(lines)


class _Stop(Exception):
    def __init__(self, reason: str, error: str | None = None, unparsed: tuple[str, ...] = ()):
        super().__init__(reason)
        self.reason = reason
        self.error = error
        self.unparsed = unparsed


@dataclass
class _Turn:
    parsed: ParsedTurn
    raw: str
    rejected: tuple[str, ...]


class _Rollout:
    def __init__(self, query: str, registry: ToolRegistry, backend: ChatBackend,
                 template: PromptTemplate, config: RolloutConfig):
        self.query = query
        self.registry = registry
        self.backend = backend
        self.template = template
        self.config = config
        self.docs = registry.docs
        self.steps: list[Step] = []
        self.markers: list[str] = []

    def _call(self, messages: list[ChatMessage]) -> str:
        if estimate_tokens(messages) > self.config.context_budget_tokens:
            raise _Stop(CONTEXT_BUDGET)
        try:
            raw = self.backend.complete(messages, self.config.generation)
        except TransportError as exc:
            raise _Stop(BACKEND_ERROR, str(exc)) from None
        return self.template.normalize(raw) if self.template.normalize else raw

    def next_turn(self, stage: str | None) -> _Turn:
        messages = render_history(self.query, self.steps, self.template, self.docs, stage)
        raw = self._call(messages)
        try:
            return _Turn(protocol.parse_turn(raw, "strict"), raw, ())
        except ProtocolError as exc:
            log.info("malformed turn (%s); re-prompting once", exc.code)
            corrective = prompts.render(prompts.CORRECTIVE_MESSAGE, violation=exc.code)
            retry = messages + [ChatMessage("assistant", raw), ChatMessage("user", corrective)]
            try:
                raw2 = self._call(retry)
            except _Stop as stop:
                raise _Stop(stop.reason, stop.error, (raw,)) from None
            try:
                return _Turn(protocol.parse_turn(raw2, "strict"), raw2, (raw,))
            except ProtocolError as exc2:
                raise _Stop(MALFORMED, exc2.code, (raw, raw2)) from None

    def add_call(self, turn: _Turn, phase: str) -> None:
        call = turn.parsed.payload
        obs = self.registry.execute(call)
        self.steps.append(Step(len(self.steps) + 1, phase, turn.raw, turn.parsed.think,
                               call, obs, rejected=turn.rejected))

    def run(self) -> Trajectory:
        cfg = self.config
        answer: str | None = None
        termination = STEP_BUDGET
        error = None
        unparsed: tuple[str, ...] = ()
        try:
            if cfg.two_stage:
                while len(self.steps) < cfg.max_trial_steps:
                    turn = self.next_turn(TRIAL)
                    if turn.parsed.is_answer:
                        self.markers.append(turn.raw)
                        break
                    self.add_call(turn, TRIAL)
            stage = EXEC if cfg.two_stage else None
            while len(self.steps) < cfg.max_total_steps:
                turn = self.next_turn(stage)
                if turn.parsed.is_answer:
                    answer = turn.parsed.payload.text
                    self.steps.append(Step(len(self.steps) + 1, EXEC, turn.raw, turn.parsed.think,
                                           answer=answer, rejected=turn.rejected))
                    termination = ANSWERED
                    break
                self.add_call(turn, EXEC)
        except _Stop as stop:
            termination, error, unparsed = stop.reason, stop.error, stop.unparsed
        steps = self.steps
        if not cfg.two_stage:
            steps = label_phases(steps, cfg.boundary_pattern)
        return Trajectory(self.query, steps, answer, termination, unparsed=unparsed,
                          stage_markers=tuple(self.markers), error=error)


def label_phases(steps: Sequence[Step], boundary_pattern: str = DEFAULT_BOUNDARY) -> list[Step]:
    """Steps before the first think matching ``boundary_pattern`` become trial.

    Without a match every step is exec.
    """
    pattern = re.compile(boundary_pattern)
    cut = next((i for i, s in enumerate(steps) if s.think and pattern.search(s.think)), None)
    if cut is None:
        return [dataclasses.replace(s, phase=EXEC) for s in steps]
    return [dataclasses.replace(s, phase=TRIAL if i < cut else EXEC) for i, s in enumerate(steps)]


def run_rollout(query: str, registry: ToolRegistry, backend: ChatBackend,
                template: PromptTemplate | None = None,
                config: RolloutConfig | None = None, query_id: str | None = None) -> Trajectory:
    if len(registry) == 0:
        raise ValueError("registry must contain at least one tool")
    traj = _Rollout(query, registry, backend, template or PromptTemplate(),
                    config or RolloutConfig()).run()
    traj.query_id = query_id
    return traj


def run_rollouts(jobs: Sequence[tuple[str, str]], registry: ToolRegistry, backend: ChatBackend,
                 template: PromptTemplate | None = None, config: RolloutConfig | None = None,
                 max_workers: int = 4) -> list[Trajectory]:
    """Run ``(query_id, query)`` jobs concurrently; results keep input order."""
    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        futures = [pool.submit(run_rollout, q, registry, backend, template, config, qid)
                   for qid, q in jobs]
        return [f.result() for f in futures]
