"""Composite outcome reward (format + correctness) and group-relative export."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from trialexec import protocol
from trialexec.agent import Trajectory, render_transcript
from trialexec.llm_io.backends import JUDGE_CONFIG, ChatBackend, GenerationConfig, TransportError
from trialexec.llm_io.judges import PASS, JudgeVerdict, judge_passrate

DEFAULT_GROUP_SIZE = 4
DEFAULT_KL_BETA = 0.002
DEFAULT_EPSILON = 1e-6
GRPO_FORMAT = "trialexec-grpo/1"


class JudgePending(RuntimeError):
    """The correctness judge was unreachable; the reward must be recomputed later."""


@dataclass(frozen=True)
class RewardRecord:
    trajectory_id: str
    r_fmt: int
    r_corr: int | None
    rationale: str = ""
    pending: bool = False

    @property
    def total(self) -> int | None:
        return None if self.r_corr is None else self.r_fmt + self.r_corr

    def to_json(self) -> dict[str, Any]:
        return {"trajectory_id": self.trajectory_id, "r_fmt": self.r_fmt, "r_corr": self.r_corr,
                "total": self.total, "rationale": self.rationale, "pending": self.pending}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "RewardRecord":
        return cls(data["trajectory_id"], data["r_fmt"], data.get("r_corr"),
                   data.get("rationale", ""), data.get("pending", False))


def correctness_reward(query: str, trajectory: Trajectory, answer: str | None,
                       judge: ChatBackend, config: GenerationConfig = JUDGE_CONFIG,
                       ) -> tuple[int, JudgeVerdict]:
    """1 iff the judge says Pass; Fail and Unsure both score 0.

    Raises JudgePending when the judge cannot be reached.
    """
    if not answer:
        return 0, JudgeVerdict("Fail", "no final answer")
    try:
        verdict = judge_passrate(judge, query, answer, render_transcript(trajectory), config)
    except TransportError as exc:
        raise JudgePending(str(exc)) from exc
    return int(verdict.status == PASS), verdict


def total_reward(trajectory: Trajectory, judge: ChatBackend, trajectory_id: str = "",
                 config: GenerationConfig = JUDGE_CONFIG) -> RewardRecord:
    r_fmt, _ = protocol.format_reward(trajectory.assistant_turns())
    try:
        r_corr, verdict = correctness_reward(trajectory.query, trajectory, trajectory.answer,
                                             judge, config)
    except JudgePending as exc:
        return RewardRecord(trajectory_id, r_fmt, None, str(exc), pending=True)
    return RewardRecord(trajectory_id, r_fmt, r_corr, verdict.rationale)


def advantages(rewards: Sequence[float], epsilon: float = DEFAULT_EPSILON) -> list[float]:
    """(r - mean) / (population std + epsilon); all zeros when std is 0."""
    if len(rewards) < 2:
        raise ValueError("a group needs at least two members")
    n = len(rewards)
    mean = math.fsum(rewards) / n
    std = math.sqrt(math.fsum((r - mean) ** 2 for r in rewards) / n)
    if std == 0:
        return [0.0] * n
    return [(r - mean) / (std + epsilon) for r in rewards]


@dataclass
class GrpoGroup:
    query_id: str
    members: list[tuple[str, float]]
    group_size: int = DEFAULT_GROUP_SIZE
    kl_beta: float = DEFAULT_KL_BETA

    def __post_init__(self) -> None:
        if self.group_size < 1:
            raise ValueError("group_size must be positive")
        if len(self.members) != self.group_size:
            raise ValueError(f"group {self.query_id} has {len(self.members)} members, "
                             f"expected {self.group_size}")


def group_advantages(group: GrpoGroup, epsilon: float = DEFAULT_EPSILON) -> list[float]:
    return advantages([r for _, r in group.members], epsilon)


@dataclass
class GroupMember:
    trajectory_id: str
    trajectory: Trajectory
    reward: RewardRecord
    messages: list[dict[str, str]] = field(default_factory=list)


def export_grpo(groups: Sequence[tuple[str, str, list[GroupMember]]], out_dir: str | Path, *,
                group_size: int = DEFAULT_GROUP_SIZE, kl_beta: float = DEFAULT_KL_BETA,
                epsilon: float = DEFAULT_EPSILON, trainer: dict[str, Any] | None = None,
                ) -> dict[str, Any]:
    """Write ``grpo.jsonl`` (one group per line) and ``grpo_manifest.json``.

    ``groups`` holds ``(query_id, query, members)``. Groups with a pending
    reward, or of the wrong size, are withheld and listed in the manifest.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines: list[str] = []
    blocked: dict[str, str] = {}
    for query_id, query, members in groups:
        if any(m.reward.pending for m in members):
            blocked[query_id] = "pending"
            continue
        if len(members) != group_size:
            blocked[query_id] = f"size {len(members)}"
            continue
        group = GrpoGroup(query_id, [(m.trajectory_id, float(m.reward.total)) for m in members],
                          group_size, kl_beta)
        advs = group_advantages(group, epsilon)
        lines.append(json.dumps({
            "query_id": query_id,
            "query": query,
            "group_size": group_size,
            "kl_beta": kl_beta,
            "members": [{
                "trajectory_id": m.trajectory_id,
                "messages": m.messages,
                "r_fmt": m.reward.r_fmt,
                "r_corr": m.reward.r_corr,
                "reward": m.reward.total,
                "advantage": a,
            } for m, a in zip(members, advs)],
        }, ensure_ascii=False, sort_keys=True))
    (out / "grpo.jsonl").write_text("".join(l + "\n" for l in lines), encoding="utf-8")
    manifest = {
        "format": GRPO_FORMAT,
        "groups": len(lines),
        "blocked": dict(sorted(blocked.items())),
        "group_size": group_size,
        "kl_beta": kl_beta,
        "advantage": {"std": "population", "epsilon": epsilon},
        "trainer": trainer or {},
    }
    (out / "grpo_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                            encoding="utf-8")
    return manifest
