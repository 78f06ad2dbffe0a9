"""Chat and embedding clients.

Live clients speak the OpenAI-compatible wire format. ``ScriptedBackend``
replays canned responses keyed by a request fingerprint so whole pipelines
run offline and bit-reproducibly.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import httpx
import numpy as np

from trialexec.protocol import RESPONSE_CLOSE, RESPONSE_OPEN, wrap_observation

log = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant", "tool")


class TransportError(RuntimeError):
    """The backend could not be reached (after retries) or refused the request."""


class ScriptMiss(LookupError):
    """A scripted backend has no entry for the request fingerprint."""


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.content is None:
            raise ValueError("content must not be None")
        if self.role == "tool" and not (
            self.content.startswith(RESPONSE_OPEN) and self.content.endswith(RESPONSE_CLOSE)
        ):
            raise ValueError("tool messages must be wrapped in <tool_response> tags")

    @classmethod
    def tool(cls, observation_text: str) -> "ChatMessage":
        return cls("tool", wrap_observation(observation_text))

    def to_json(self) -> dict[str, str]:
        return {"role": self.role, "content": self.content}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "ChatMessage":
        return cls(data["role"], data["content"])


@dataclass(frozen=True)
class GenerationConfig:
    temperature: float = 0.1
    max_tokens: int = 8192
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"temperature": self.temperature, "max_tokens": self.max_tokens}
        if self.seed is not None:
            out["seed"] = self.seed
        return out


JUDGE_CONFIG = GenerationConfig(temperature=0.0, max_tokens=2048)


def fingerprint(messages: Sequence[ChatMessage], config: GenerationConfig) -> str:
    payload = {
        "messages": [[m.role, m.content] for m in messages],
        "config": config.to_json(),
    }
    blob = json.dumps(payload, ensure_ascii=False, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ChatBackend:
    """Base class; subclasses implement ``_complete``."""

    name = "chat"

    def complete(self, messages: Sequence[ChatMessage], config: GenerationConfig) -> str:
        if not messages:
            raise ValueError("messages must be non-empty")
        if messages[0].role != "system":
            raise ValueError("first message must be the system message")
        return self._complete(list(messages), config)

    def _complete(self, messages: list[ChatMessage], config: GenerationConfig) -> str:
        raise NotImplementedError


def complete(backend: ChatBackend, messages: Sequence[ChatMessage],
             config: GenerationConfig) -> str:
    return backend.complete(messages, config)


class ScriptedBackend(ChatBackend):
    name = "scripted"

    def __init__(self, entries: dict[str, str] | Iterable[tuple[str, str]] = ()):
        self.entries = dict(entries)

    def _complete(self, messages: list[ChatMessage], config: GenerationConfig) -> str:
        fp = fingerprint(messages, config)
        try:
            return self.entries[fp]
        except KeyError:
            raise ScriptMiss(f"no scripted response for fingerprint {fp[:12]}") from None

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for fp, response in self.entries.items():
                fh.write(json.dumps({"fingerprint": fp, "response": response},
                                    ensure_ascii=False, sort_keys=True) + "\n")

    @classmethod
    def load(cls, *paths: str | Path) -> "ScriptedBackend":
        entries: dict[str, str] = {}
        for path in paths:
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        rec = json.loads(line)
                        entries[rec["fingerprint"]] = rec["response"]
        return cls(entries)

    def merge(self, other: "ScriptedBackend") -> "ScriptedBackend":
        return ScriptedBackend({**self.entries, **other.entries})


class QueueBackend(ChatBackend):
    """Returns queued responses in order regardless of the request.

    Meant for authoring scripts: wrap it in a RecordingBackend, run the
    pipeline once, then replay the recording with ScriptedBackend.
    """

    name = "queue"

    def __init__(self, responses: Iterable[str]):
        self._responses = list(responses)
        self._lock = threading.Lock()

    def _complete(self, messages: list[ChatMessage], config: GenerationConfig) -> str:
        with self._lock:
            if not self._responses:
                raise ScriptMiss("response queue exhausted")
            return self._responses.pop(0)

    @property
    def remaining(self) -> int:
        return len(self._responses)


class CallableBackend(ChatBackend):
    """Stub whose reply is computed by ``fn(messages, config)``."""

    name = "callable"

    def __init__(self, fn: Callable[[list[ChatMessage], GenerationConfig], str]):
        self.fn = fn

    def _complete(self, messages: list[ChatMessage], config: GenerationConfig) -> str:
        return self.fn(messages, config)


class RecordingBackend(ChatBackend):
    def __init__(self, inner: ChatBackend):
        self.inner = inner
        self.name = inner.name
        self.records: list[tuple[str, str]] = []
        self.requests: list[list[ChatMessage]] = []
        self._lock = threading.Lock()

    def _complete(self, messages: list[ChatMessage], config: GenerationConfig) -> str:
        response = self.inner.complete(messages, config)
        with self._lock:
            self.records.append((fingerprint(messages, config), response))
            self.requests.append(messages)
        return response

    def to_script(self) -> ScriptedBackend:
        return ScriptedBackend(self.records)


def _api_key(env_var: str | None) -> str | None:
    if not env_var:
        return None
    return os.environ.get(env_var)


class _RetryingClient:
    def __init__(self, base_url: str, api_key_env: str | None, timeout: float,
                 attempts: int, backoff: float, seed: int, max_in_flight: int,
                 client: httpx.Client | None = None):
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.attempts = attempts
        self.backoff = backoff
        self._rng = random.Random(seed)
        self._rng_lock = threading.Lock()
        self._slots = threading.Semaphore(max_in_flight)
        self._client = client or httpx.Client(timeout=timeout)

    def _sleep(self, attempt: int) -> None:
        with self._rng_lock:
            jitter = self._rng.uniform(0, self.backoff)
        time.sleep(self.backoff * 2 ** attempt + jitter)

    def post(self, path: str, body: dict[str, Any]) -> dict[str, Any]:
        headers = {"Content-Type": "application/json"}
        key = _api_key(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        url = f"{self.base_url}/{path.lstrip('/')}"
        last = ""
        with self._slots:
            for attempt in range(self.attempts):
                if attempt:
                    self._sleep(attempt - 1)
                try:
                    resp = self._client.post(url, json=body, headers=headers, timeout=self.timeout)
                except httpx.HTTPError as exc:
                    last = f"{type(exc).__name__}: {exc}"
                    log.warning("POST %s attempt %d failed: %s", url, attempt + 1, last)
                    continue
                if resp.status_code == 429 or resp.status_code >= 500:
                    last = f"HTTP {resp.status_code}"
                    log.warning("POST %s attempt %d got %s", url, attempt + 1, last)
                    continue
                if not resp.is_success:
                    raise TransportError(f"HTTP {resp.status_code}: {resp.text[:500]}")
                try:
                    return resp.json()
                except ValueError:
                    raise TransportError("response body is not JSON") from None
        raise TransportError(f"{url}: {last}")


class OpenAIChatBackend(ChatBackend):
    """OpenAI-compatible ``/chat/completions`` client.

    ``tool_role`` is the wire role used for observation messages; plain
    chat endpoints reject ``tool`` without a tool_call_id, so ``user`` is the
    default.
    """

    name = "openai"

    def __init__(self, base_url: str, model: str, *, api_key_env: str | None = None,
                 timeout: float = 120.0, attempts: int = 3, backoff: float = 1.0,
                 seed: int = 0, max_in_flight: int = 8, tool_role: str = "user",
                 client: httpx.Client | None = None):
        self.model = model
        self.tool_role = tool_role
        self.name = f"openai:{model}"
        self._http = _RetryingClient(base_url, api_key_env, timeout, attempts, backoff,
                                     seed, max_in_flight, client)

    def request_body(self, messages: Sequence[ChatMessage], config: GenerationConfig) -> dict[str, Any]:
        wire = [{"role": self.tool_role if m.role == "tool" else m.role, "content": m.content}
                for m in messages]
        return {"model": self.model, "messages": wire, **config.to_json()}

    def _complete(self, messages: list[ChatMessage], config: GenerationConfig) -> str:
        data = self._http.post("chat/completions", self.request_body(messages, config))
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise TransportError("malformed chat completion response") from None
        return content or ""


# -- embeddings ---------------------------------------------------------


class EmbeddingBackend:
    name = "embedding"

    def embed_raw(self, texts: list[str]) -> list[list[float]]:
        raise NotImplementedError


class StubEmbeddingBackend(EmbeddingBackend):
    """Fixed text -> vector table; unknown texts get a seeded pseudo-random vector."""

    name = "stub"

    def __init__(self, table: dict[str, Sequence[float]] | None = None, dim: int | None = None,
                 strict: bool = False):
        self.table = {k: list(map(float, v)) for k, v in (table or {}).items()}
        if dim is None:
            dim = len(next(iter(self.table.values()))) if self.table else 16
        self.dim = dim
        self.strict = strict
        self.calls = 0

    def embed_raw(self, texts: list[str]) -> list[list[float]]:
        self.calls += 1
        out = []
        for text in texts:
            if text in self.table:
                out.append(self.table[text])
            elif self.strict:
                raise KeyError(f"no stub embedding for {text[:40]!r}")
            else:
                seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")
                out.append(np.random.default_rng(seed).standard_normal(self.dim).tolist())
        return out


class OpenAIEmbeddingBackend(EmbeddingBackend):
    name = "openai-embedding"

    def __init__(self, base_url: str, model: str, *, api_key_env: str | None = None,
                 timeout: float = 60.0, attempts: int = 3, backoff: float = 1.0, seed: int = 0,
                 max_in_flight: int = 8, batch_size: int = 64, client: httpx.Client | None = None):
        self.model = model
        self.batch_size = batch_size
        self._http = _RetryingClient(base_url, api_key_env, timeout, attempts, backoff,
                                     seed, max_in_flight, client)

    def embed_raw(self, texts: list[str]) -> list[list[float]]:
        out: list[list[float]] = []
        for i in range(0, len(texts), self.batch_size):
            batch = texts[i:i + self.batch_size]
            data = self._http.post("embeddings", {"model": self.model, "input": batch})
            try:
                rows = sorted(data["data"], key=lambda r: r.get("index", 0))
                out.extend(r["embedding"] for r in rows)
            except (KeyError, TypeError):
                raise TransportError("malformed embedding response") from None
        return out


def embed(backend: EmbeddingBackend, texts: Sequence[str]) -> list[np.ndarray]:
    """Embed and L2-normalize; all vectors share one dimension."""
    if not texts:
        raise ValueError("texts must be non-empty")
    raw = backend.embed_raw(list(texts))
    if len(raw) != len(texts):
        raise DimensionMismatch(f"expected {len(texts)} vectors, got {len(raw)}")
    dims = {len(v) for v in raw}
    if len(dims) != 1:
        raise DimensionMismatch(f"ragged embedding dimensions {sorted(dims)}")
    out = []
    for vec in raw:
        arr = np.asarray(vec, dtype=np.float64)
        norm = np.linalg.norm(arr)
        if norm == 0 or not np.isfinite(norm):
            raise ValueError("cannot normalize a zero or non-finite embedding")
        out.append(arr / norm)
    return out
