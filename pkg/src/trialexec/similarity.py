"""Tool familiarity analysis over embedded tool documentation."""

from __future__ import annotations

import hashlib
import json
import threading
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from trialexec.agent import Trajectory
from trialexec.llm_io.backends import EmbeddingBackend, embed
from trialexec.toolenv import ToolDoc

LOW, MEDIUM, HIGH = "Low", "Medium", "High"
GROUPS = (LOW, MEDIUM, HIGH)
FAMILIAR, UNFAMILIAR, OTHER = "Familiar", "Unfamiliar", "Other"
FIXED, TERTILE = "fixed", "tertile"


@dataclass(frozen=True)
class GroupThresholds:
    t_low_med: float = 0.65
    t_med_high: float = 0.80

    def __post_init__(self) -> None:
        if not -1 < self.t_low_med < self.t_med_high < 1:
            raise ValueError("thresholds must satisfy -1 < t_low_med < t_med_high < 1")


def canonical_doc_text(doc: ToolDoc) -> str:
    """Deterministic text for embedding: name, description, params in declared order."""
    lines = [f"name: {doc.name}", f"description: {doc.description}"]
    for p in doc.params:
        line = f"param: {p.name} | {p.kind} | {'required' if p.required else 'optional'}"
        if p.enum_values is not None:
            line += " | enum: " + json.dumps(list(p.enum_values), ensure_ascii=False)
        lines.append(line)
    return "\n".join(lines)


def text_key(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class EmbeddingCache:
    """Normalized embeddings keyed by sha256 of the canonical text.

    Persisted as JSONL, one ``{"key", "vector"}`` object per line, appended
    as new texts are embedded. Only cache misses reach the backend, in one
    batch per lookup.
    """

    def __init__(self, backend: EmbeddingBackend | None, path: str | Path | None = None):
        self.backend = backend
        self.path = Path(path) if path else None
        self._vectors: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    row = json.loads(line)
                    self._vectors[row["key"]] = np.asarray(row["vector"], dtype=np.float64)

    def __len__(self) -> int:
        return len(self._vectors)

    def vectors(self, texts: Sequence[str]) -> list[np.ndarray]:
        keys = [text_key(t) for t in texts]
        with self._lock:
            missing: dict[str, str] = {}
            for k, t in zip(keys, texts):
                if k not in self._vectors:
                    missing.setdefault(k, t)
            if missing:
                if self.backend is None:
                    raise LookupError(f"{len(missing)} texts not cached and no embedding backend")
                fresh = embed(self.backend, list(missing.values()))
                dims = {v.shape[0] for v in self._vectors.values()} | {v.shape[0] for v in fresh}
                if len(dims) > 1:
                    raise ValueError(f"embedding dimensions disagree with cache: {sorted(dims)}")
                new = dict(zip(missing, fresh))
                self._vectors.update(new)
                if self.path:
                    self.path.parent.mkdir(parents=True, exist_ok=True)
                    with self.path.open("a", encoding="utf-8") as fh:
                        for k, v in new.items():
                            fh.write(json.dumps({"key": k, "vector": v.tolist()}) + "\n")
            return [self._vectors[k] for k in keys]

    def doc_vectors(self, docs: Sequence[ToolDoc]) -> list[np.ndarray]:
        return self.vectors([canonical_doc_text(d) for d in docs])


def _cache(source: EmbeddingBackend | EmbeddingCache) -> EmbeddingCache:
    return source if isinstance(source, EmbeddingCache) else EmbeddingCache(source)


def similarity(doc_a: ToolDoc, doc_b: ToolDoc, backend: EmbeddingBackend | EmbeddingCache) -> float:
    """Dot product of the two normalized documentation embeddings."""
    va, vb = _cache(backend).doc_vectors([doc_a, doc_b])
    return float(np.dot(va, vb))


def max_similarity_to_training(tool: ToolDoc, training_docs: Sequence[ToolDoc],
                               backend: EmbeddingBackend | EmbeddingCache) -> float:
    if not training_docs:
        raise ValueError("training_docs must be non-empty")
    cache = _cache(backend)
    vecs = cache.doc_vectors([tool, *training_docs])
    return float(np.max(np.stack(vecs[1:]) @ vecs[0]))


def assign_group(score: float, thresholds: GroupThresholds = GroupThresholds()) -> str:
    if score < thresholds.t_low_med:
        return LOW
    if score < thresholds.t_med_high:
        return MEDIUM
    return HIGH


def tertile_groups(scores: Mapping[str, float]) -> dict[str, str]:
    """Split tools into three near-equal groups by ascending score.

    Ties are broken by name so the split is deterministic; the extra
    members of an uneven split go to the lower groups first.
    """
    ordered = sorted(scores, key=lambda name: (scores[name], name))
    n = len(ordered)
    sizes = [n // 3 + (1 if i < n % 3 else 0) for i in range(3)]
    out: dict[str, str] = {}
    start = 0
    for group, size in zip(GROUPS, sizes):
        for name in ordered[start:start + size]:
            out[name] = group
        start += size
    return out


def classify_query_familiarity(groups: Iterable[str]) -> str:
    groups = list(groups)
    if not groups:
        raise ValueError("a query needs at least one grouped gold tool")
    for g in groups:
        if g not in GROUPS:
            raise ValueError(f"unknown group {g!r}")
    if LOW in groups:
        return UNFAMILIAR
    if all(g == HIGH for g in groups):
        return FAMILIAR
    return OTHER


def group_aggregates(trajectories: Iterable[Trajectory], tool_groups: Mapping[str, str],
                     ) -> dict[str, dict[str, Any]]:
    """Per-group call success rate and share of calls.

    Only calls to tools that carry a group are counted; a call succeeds
    when its observation status is ok.
    """
    attempts: Counter[str] = Counter()
    ok: Counter[str] = Counter()
    for traj in trajectories:
        for step in traj.steps:
            group = tool_groups.get(step.action.name)
            if group is None:
                continue
            attempts[group] += 1
            if step.observation is not None and step.observation.ok:
                ok[group] += 1
    total = sum(attempts.values())
    return {
        g: {
            "attempts": attempts[g],
            "ok": ok[g],
            "success_rate": ok[g] / attempts[g] if attempts[g] else None,
            "frequency": attempts[g] / total if total else 0.0,
        }
        for g in GROUPS
    }


@dataclass(frozen=True)
class ToolScore:
    name: str
    score: float
    group: str


@dataclass
class SimilarityReport:
    tools: list[ToolScore]
    mode: str = FIXED
    thresholds: GroupThresholds = GroupThresholds()
    aggregates: dict[str, dict[str, Any]] = field(default_factory=dict)
    familiarity: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        names = [t.name for t in self.tools]
        if len(names) != len(set(names)):
            raise ValueError("duplicate tool in report")

    @property
    def groups(self) -> dict[str, str]:
        return {t.name: t.group for t in self.tools}

    def to_json(self) -> dict[str, Any]:
        return {
            "mode": self.mode,
            "thresholds": {"t_low_med": self.thresholds.t_low_med,
                           "t_med_high": self.thresholds.t_med_high},
            "tools": [{"name": t.name, "score": t.score, "group": t.group} for t in self.tools],
            "aggregates": self.aggregates,
            "familiarity": dict(sorted(self.familiarity.items())),
            "familiarity_counts": dict(sorted(Counter(self.familiarity.values()).items())),
        }

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")


def build_report(test_docs: Sequence[ToolDoc], training_docs: Sequence[ToolDoc],
                 backend: EmbeddingBackend | EmbeddingCache, *,
                 thresholds: GroupThresholds = GroupThresholds(), mode: str = FIXED,
                 trajectories: Sequence[Trajectory] = (),
                 query_tools: Mapping[str, Iterable[str]] | None = None) -> SimilarityReport:
    """Score each test tool against the training tools, group, and aggregate.

    ``query_tools`` maps a query id to its gold tool names; queries whose
    tools are all scored get a familiarity label.
    """
    if mode not in (FIXED, TERTILE):
        raise ValueError(f"unknown grouping mode {mode!r}")
    if not training_docs:
        raise ValueError("training_docs must be non-empty")
    cache = _cache(backend)
    train = np.stack(cache.doc_vectors(list(training_docs)))
    test = cache.doc_vectors(list(test_docs))
    scores = {d.name: float(np.max(train @ v)) for d, v in zip(test_docs, test)}
    if mode == TERTILE:
        groups = tertile_groups(scores)
    else:
        groups = {name: assign_group(s, thresholds) for name, s in scores.items()}
    tools = [ToolScore(d.name, scores[d.name], groups[d.name]) for d in test_docs]
    familiarity = {}
    for qid, names in (query_tools or {}).items():
        names = list(names)
        if names and all(n in groups for n in names):
            familiarity[qid] = classify_query_familiarity(groups[n] for n in names)
    return SimilarityReport(tools, mode, thresholds,
                            group_aggregates(trajectories, groups) if trajectories else {},
                            familiarity)
