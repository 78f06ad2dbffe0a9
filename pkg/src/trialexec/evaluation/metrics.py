from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from trialexec.agent import Trajectory, count_tool_calls, render_transcript
from trialexec.llm_io.backends import ChatBackend, TransportError
from trialexec.llm_io.judges import ERROR_CLASSES, FAIL, PASS, UNCLASSIFIED, UNSURE, judge_error_type
from trialexec.toolenv import Observation

log = logging.getLogger(__name__)

SOLVED, UNSOLVED = "Solved", "Unsolved"
VERDICTS = (SOLVED, UNSOLVED, UNSURE)
STATUS_TO_VERDICT = {PASS: SOLVED, FAIL: UNSOLVED, UNSURE: UNSURE}


@dataclass(frozen=True)
class GoldSpec:
    query_id: str
    gold_answer: str | None = None
    gold_tools: frozenset[str] | None = None

    def __post_init__(self) -> None:
        if self.gold_answer is None and not self.gold_tools:
            raise ValueError(f"{self.query_id}: gold needs an answer or a tool set")
        if self.gold_tools is not None:
            object.__setattr__(self, "gold_tools", frozenset(self.gold_tools))


@dataclass(frozen=True)
class EvalRecord:
    query_id: str
    verdict: str | None = None
    contains_gold: bool | None = None
    error_class: str | None = None
    path_recall: float | None = None
    tool_calls: int = 0
    flag: str | None = None

    def __post_init__(self) -> None:
        if self.verdict is not None and self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.error_class is not None and self.solved:
            raise ValueError("solved records carry no error class")

    @property
    def solved(self) -> bool:
        return self.verdict == SOLVED or (self.verdict is None and self.contains_gold is True)

    def to_json(self) -> dict[str, Any]:
        return {k: v for k, v in self.__dict__.items()}


def sopr(verdicts: Sequence[str]) -> float:
    """Solvable pass rate: Solved scores 1, Unsolved and Unsure score 0."""
    if not verdicts:
        raise ValueError("sopr of an empty verdict list")
    for v in verdicts:
        if v not in VERDICTS:
            raise ValueError(f"unknown verdict {v!r}")
    return sum(v == SOLVED for v in verdicts) / len(verdicts)


def normalize_text(text: str) -> str:
    return " ".join(text.casefold().split())


def answer_correct(final_answer: str, gold: str) -> bool:
    """Containment of the normalized gold answer in the normalized output."""
    gold_n = normalize_text(gold)
    if not gold_n:
        raise ValueError("gold answer must be non-empty")
    return gold_n in normalize_text(final_answer or "")


def called_tools(trajectory: Trajectory) -> set[str]:
    return {c.name for c in trajectory.calls}


def correct_path_rate(called: Trajectory | Iterable[str], gold_tools: Iterable[str]) -> float:
    """Recall of the gold tool set among distinct invoked tools."""
    gold = set(gold_tools)
    if not gold:
        raise ValueError("gold_tools must be non-empty")
    names = called_tools(called) if isinstance(called, Trajectory) else set(called)
    return len(names & gold) / len(gold)


def avg_tool_calls(trajectories: Sequence[Trajectory]) -> float:
    if not trajectories:
        raise ValueError("no trajectories")
    return sum(count_tool_calls(t) for t in trajectories) / len(trajectories)


def cumulative_correctness_curve(records: Sequence[tuple[int, bool]], max_step: int,
                                 ) -> list[tuple[int, float]]:
    """For s = 0..max_step, the share of all records that are correct with at
    most s tool calls."""
    if not records:
        raise ValueError("no records")
    n = len(records)
    hist = Counter(calls for calls, ok in records if ok)
    out = []
    running = 0
    for s in range(max_step + 1):
        running += hist.get(s, 0)
        out.append((s, running / n))
    return out


_FAILURE_RE = re.compile(
    r"\b(error|errors|not found|no data|no results?|not available|unavailable|failed|invalid)\b",
    re.IGNORECASE)
_EMPTY_TEXTS = {"", "[]", "{}", "none", "null", '""'}


def is_failed_observation(obs: Observation) -> bool:
    """Tool error, empty payload, or an error/not-found message in the text."""
    if not obs.ok:
        return True
    text = obs.text.strip()
    return text.lower() in _EMPTY_TEXTS or bool(_FAILURE_RE.search(text))


def heuristic_error_class(trajectory: Trajectory, gold_tools: Iterable[str] | None = None) -> str:
    """Offline stand-in for the error-type judge, applying its priority order.

    I  - no tool calls, or some gold tool never attempted;
    II - the last observation is an unrecovered failure, or one identical
         failed call was repeated three or more times;
    III - otherwise.
    """
    calls = called_tools(trajectory)
    if not calls or (gold_tools and set(gold_tools) - calls):
        return "I"
    observed = [s for s in trajectory.steps if s.observation is not None]
    if is_failed_observation(observed[-1].observation):
        return "II"
    repeats = Counter(
        (s.action.name, json.dumps(s.action.arguments, sort_keys=True))
        for s in observed if is_failed_observation(s.observation))
    if repeats and max(repeats.values()) >= 3:
        return "II"
    return "III"


def classify_error(question: str, gold: str, trajectory: Trajectory,
                   judge: ChatBackend | None = None, *, mode: str = "judge",
                   gold_tools: Iterable[str] | None = None) -> str:
    if mode == "heuristic":
        return heuristic_error_class(trajectory, gold_tools)
    if mode != "judge":
        raise ValueError(f"unknown mode {mode!r}")
    if judge is None:
        raise ValueError("judge mode needs a judge backend")
    try:
        return judge_error_type(judge, question, gold, render_transcript(trajectory))
    except TransportError as exc:
        log.warning("error-type judge unavailable: %s", exc)
        return UNCLASSIFIED


def error_distribution(classes: Iterable[str]) -> dict[str, Any]:
    """Counts per class; shares are over classified (I/II/III) records only."""
    counts = Counter(classes)
    classified = sum(counts[c] for c in ERROR_CLASSES)
    return {
        "counts": {c: counts.get(c, 0) for c in (*ERROR_CLASSES, UNCLASSIFIED)},
        "shares": {c: (counts.get(c, 0) / classified if classified else 0.0) for c in ERROR_CLASSES},
        "classified": classified,
    }
