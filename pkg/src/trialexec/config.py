"""Pipeline configuration: a YAML tree resolved into typed settings and backends."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from trialexec.agent import RolloutConfig
from trialexec.llm_io.backends import (
    CallableBackend,
    ChatBackend,
    EmbeddingBackend,
    GenerationConfig,
    OpenAIChatBackend,
    OpenAIEmbeddingBackend,
    ScriptedBackend,
    StubEmbeddingBackend,
)
from trialexec.similarity import FIXED, TERTILE, GroupThresholds
from trialexec.toolenv import ToolRegistry

ROLES = ("policy", "teacher", "filter_judge", "reward_judge", "evaluator", "error_judge", "embedding")
BACKEND_KINDS = ("openai", "scripted", "stub")
_SECRET_KEYS = {"api_key", "apikey", "key", "token", "secret", "password", "authorization"}
_TOP_KEYS = {"run_id", "seed", "paths", "budgets", "backends", "rollout", "filter", "rewards",
             "similarity", "evaluation", "trainer"}


class ConfigError(ValueError):
    pass


def _check_no_secrets(node: Any, where: str = "") -> None:
    if isinstance(node, Mapping):
        for k, v in node.items():
            if str(k).lower() in _SECRET_KEYS and v not in (None, ""):
                raise ConfigError(f"{where}{k}: credentials belong in environment variables; "
                                  f"name the variable with key_env instead")
            _check_no_secrets(v, f"{where}{k}.")
    elif isinstance(node, list):
        for i, v in enumerate(node):
            _check_no_secrets(v, f"{where}{i}.")


@dataclass(frozen=True)
class BackendSpec:
    kind: str
    endpoint: str | None = None
    model: str | None = None
    key_env: str | None = None
    scripts: tuple[Path, ...] = ()
    reply: str | None = None
    table: Path | None = None
    dim: int | None = None
    tool_role: str = "user"
    timeout: float | None = None

    @classmethod
    def from_dict(cls, role: str, data: Mapping[str, Any], base: Path) -> "BackendSpec":
        kind = data.get("kind")
        if kind not in BACKEND_KINDS:
            raise ConfigError(f"backends.{role}.kind must be one of {list(BACKEND_KINDS)}")
        scripts = tuple(base / p for p in data.get("scripts") or ())
        table = base / data["table"] if data.get("table") else None
        spec = cls(kind, data.get("endpoint"), data.get("model"), data.get("key_env"), scripts,
                   data.get("reply"), table, data.get("dim"), data.get("tool_role", "user"),
                   float(data["timeout"]) if data.get("timeout") else None)
        if kind == "openai" and not (spec.endpoint and spec.model):
            raise ConfigError(f"backends.{role}: openai backends need endpoint and model")
        if kind == "scripted" and not scripts:
            raise ConfigError(f"backends.{role}: scripted backends need scripts")
        for p in (*scripts, *([table] if table else [])):
            if not p.exists():
                raise ConfigError(f"backends.{role}: missing file {p}")
        return spec

    def chat(self, seed: int = 0, max_in_flight: int = 8) -> ChatBackend:
        if self.kind == "openai":
            kwargs = {"timeout": self.timeout} if self.timeout else {}
            return OpenAIChatBackend(self.endpoint, self.model, api_key_env=self.key_env, seed=seed,
                                     max_in_flight=max_in_flight, tool_role=self.tool_role, **kwargs)
        if self.kind == "scripted":
            return ScriptedBackend.load(*self.scripts)
        if self.reply is None:
            raise ConfigError("stub chat backends need a reply")
        reply = self.reply
        return CallableBackend(lambda messages, config: reply)

    def embedding(self, seed: int = 0, max_in_flight: int = 8) -> EmbeddingBackend:
        if self.kind == "openai":
            return OpenAIEmbeddingBackend(self.endpoint, self.model, api_key_env=self.key_env,
                                          seed=seed, max_in_flight=max_in_flight)
        if self.kind == "stub":
            table = json.loads(self.table.read_text(encoding="utf-8")) if self.table else {}
            return StubEmbeddingBackend(table, self.dim)
        raise ConfigError("embedding backends must be openai or stub")


@dataclass
class PipelineConfig:
    store: Path
    out: Path
    registry: Path | None = None
    backends: dict[str, BackendSpec] = field(default_factory=dict)
    rollout: RolloutConfig = field(default_factory=RolloutConfig)
    run_id: str = "default"
    seed: int = 0
    max_concurrency: int = 4
    query_cap: int | None = None
    votes: int = 1
    group_size: int = 4
    kl_beta: float = 0.002
    epsilon: float = 1e-6
    thresholds: GroupThresholds = field(default_factory=GroupThresholds)
    similarity_mode: str = FIXED
    embedding_cache: Path | None = None
    error_mode: str = "judge"
    trainer: dict[str, Any] = field(default_factory=lambda: {
        "sft_learning_rate": 1e-5, "rl_learning_rate": 1e-6})

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from None
        return cls.from_dict(data, path.parent)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base: str | Path = ".") -> "PipelineConfig":
        base = Path(base)
        if not isinstance(data, Mapping):
            raise ConfigError("config root must be a mapping")
        unknown = set(data) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        _check_no_secrets(data)
        try:
            return cls._build(data, base)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def _build(cls, data: Mapping[str, Any], base: Path) -> "PipelineConfig":
        paths = data.get("paths") or {}
        budgets = data.get("budgets") or {}
        roll = data.get("rollout") or {}
        rewards = data.get("rewards") or {}
        sim = data.get("similarity") or {}
        evaluation = data.get("evaluation") or {}

        registry = base / paths["registry"] if paths.get("registry") else None
        if registry is not None and not registry.exists():
            raise ConfigError(f"paths.registry: missing file {registry}")
        backends = {}
        for role, spec in (data.get("backends") or {}).items():
            if role not in ROLES:
                raise ConfigError(f"unknown backend role {role!r}; expected one of {list(ROLES)}")
            backends[role] = BackendSpec.from_dict(role, spec or {}, base)

        generation = GenerationConfig(float(roll.get("temperature", 0.1)),
                                      int(roll.get("max_tokens", 8192)))
        rollout = RolloutConfig(int(roll.get("max_trial_steps", 8)),
                                int(roll.get("max_total_steps", 20)), generation,
                                bool(roll.get("two_stage", True)),
                                int(roll.get("context_budget_tokens", 8192)))
        mode = sim.get("mode", FIXED)
        if mode not in (FIXED, TERTILE):
            raise ConfigError(f"similarity.mode must be {FIXED!r} or {TERTILE!r}")
        error_mode = evaluation.get("error_mode", "judge")
        if error_mode not in ("judge", "heuristic"):
            raise ConfigError("evaluation.error_mode must be 'judge' or 'heuristic'")
        cap = budgets.get("query_cap")
        trainer = {k: (float(v) if k.endswith("learning_rate") else v)
                   for k, v in (data.get("trainer") or {}).items()}
        cfg = cls(
            store=base / paths.get("store", "store"),
            out=base / paths.get("out", "out"),
            registry=registry,
            backends=backends,
            rollout=rollout,
            run_id=str(data.get("run_id", "default")),
            seed=int(data.get("seed", 0)),
            max_concurrency=int(budgets.get("max_concurrency", 4)),
            query_cap=int(cap) if cap is not None else None,
            votes=int((data.get("filter") or {}).get("votes", 1)),
            group_size=int(rewards.get("group_size", 4)),
            kl_beta=float(rewards.get("kl_beta", 0.002)),
            epsilon=float(rewards.get("epsilon", 1e-6)),
            thresholds=GroupThresholds(float(sim.get("t_low_med", 0.65)),
                                       float(sim.get("t_med_high", 0.80))),
            similarity_mode=mode,
            embedding_cache=base / sim["cache"] if sim.get("cache") else None,
            error_mode=error_mode,
        )
        if trainer:
            cfg.trainer = {**cfg.trainer, **trainer}
        if cfg.max_concurrency < 1:
            raise ConfigError("budgets.max_concurrency must be positive")
        if cfg.votes < 1 or cfg.votes % 2 == 0:
            raise ConfigError("filter.votes must be a positive odd number")
        if cfg.group_size < 2:
            raise ConfigError("rewards.group_size must be at least 2")
        return cfg

    def load_registry(self) -> ToolRegistry:
        if self.registry is None:
            raise ConfigError("paths.registry is not set")
        return ToolRegistry.load(self.registry)

    def backend(self, role: str) -> BackendSpec:
        try:
            return self.backends[role]
        except KeyError:
            raise ConfigError(f"no {role!r} backend configured") from None

    def chat(self, role: str) -> ChatBackend:
        return self.backend(role).chat(self.seed, self.max_concurrency)

    def embedding_backend(self) -> EmbeddingBackend:
        if "embedding" not in self.backends:
            raise ConfigError("similarity analysis needs an 'embedding' backend")
        return self.backends["embedding"].embedding(self.seed, self.max_concurrency)
