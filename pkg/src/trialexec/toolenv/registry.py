from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Union

import httpx

from trialexec.protocol import ToolCall
from trialexec.toolenv import builtins
from trialexec.toolenv.docs import ToolDoc, kind_matches

log = logging.getLogger(__name__)

OK = "ok"
TOOL_ERROR = "tool_error"
NOT_FOUND = "not_found"
SCHEMA_ERROR = "schema_error"

UNKNOWN_ARGUMENT = "UnknownArgument"
MISSING_REQUIRED = "MissingRequired"
KIND_MISMATCH = "KindMismatch"
ENUM_VIOLATION = "EnumViolation"

DEFAULT_OBSERVATION_CAP = 4096


class DuplicateTool(ValueError):
    pass


@dataclass(frozen=True)
class SchemaViolation:
    code: str
    name: str


@dataclass(frozen=True)
class Observation:
    text: str
    status: str = OK
    elapsed: float = 0.0
    transport: bool = False

    @property
    def ok(self) -> bool:
        return self.status == OK

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"status": self.status, "text": self.text}
        if self.transport:
            out["transport"] = True
        return out

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Observation":
        return cls(text=data["text"], status=data.get("status", OK),
                   transport=bool(data.get("transport", False)))


@dataclass(frozen=True)
class ErrorTemplates:
    """Observation text for environment-side failures.

    ``call_error`` wraps the details marked as wrapped (the Python-style
    TypeError messages); enum and kind errors are reported bare.
    """

    call_error: str = "an error occured when call {tool}: {detail}"
    unknown_argument: str = "{tool}() got an unexpected keyword argument '{name}'"
    missing_required: str = "{tool}() missing 1 required positional argument: '{name}'"
    kind_mismatch: str = "Error: '{name}' must be of type {kind}."
    enum_violation: str = "Error: '{name}' must be one of {allowed}."
    not_found: str = "{tool} is not a valid tool, try something else."
    transport: str = "transport failure: {detail}"

    def render(self, tool: str, violation: SchemaViolation, doc: ToolDoc) -> str:
        name = violation.name
        if violation.code == UNKNOWN_ARGUMENT:
            return self.wrap(tool, self.unknown_argument.format(tool=tool, name=name))
        if violation.code == MISSING_REQUIRED:
            return self.wrap(tool, self.missing_required.format(tool=tool, name=name))
        param = doc.param(name)
        if violation.code == KIND_MISMATCH:
            return self.kind_mismatch.format(tool=tool, name=name, kind=param.kind)
        allowed = repr(list(param.enum_values or ()))
        return self.enum_violation.format(tool=tool, name=name, allowed=allowed)

    def wrap(self, tool: str, detail: str) -> str:
        return self.call_error.format(tool=tool, detail=detail)


def validate_call(call: ToolCall, doc: ToolDoc) -> list[SchemaViolation]:
    """Empty list means the call conforms to ``doc``.

    Order: unknown arguments (call order), missing required (declaration
    order), then per declared parameter a kind check and an enum check.
    """
    if call.name != doc.name:
        raise ValueError(f"call to {call.name!r} validated against {doc.name!r}")
    declared = {p.name for p in doc.params}
    out = [SchemaViolation(UNKNOWN_ARGUMENT, a) for a in call.arguments if a not in declared]
    out += [SchemaViolation(MISSING_REQUIRED, p.name)
            for p in doc.params if p.required and p.name not in call.arguments]
    for p in doc.params:
        if p.name not in call.arguments:
            continue
        value = call.arguments[p.name]
        if not kind_matches(p.kind, value):
            out.append(SchemaViolation(KIND_MISMATCH, p.name))
        elif p.enum_values is not None and value not in p.enum_values:
            out.append(SchemaViolation(ENUM_VIOLATION, p.name))
    return out


@dataclass
class MockBinding:
    fn: builtins.MockFn
    builtin: str | None = None
    config: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def builtin_tool(cls, identifier: str, config: dict[str, Any] | None = None) -> "MockBinding":
        return cls(builtins.resolve(identifier, config), identifier, dict(config or {}))


@dataclass
class HttpBinding:
    """POST the argument map as JSON to ``url_template`` (``{tool}`` is substituted)."""

    url_template: str
    timeout: float = 30.0
    retries: int = 2
    backoff: float = 0.5
    max_in_flight: int = 8
    headers: dict[str, str] = field(default_factory=dict)
    _slots: threading.Semaphore = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._slots = threading.Semaphore(self.max_in_flight)

    def post(self, tool: str, arguments: dict[str, Any],
             client: httpx.Client | None = None) -> tuple[str, str, bool]:
        """Returns (status, body_or_detail, transport_flag)."""
        url = self.url_template.format(tool=tool)
        detail = ""
        with self._slots:
            for attempt in range(self.retries + 1):
                if attempt:
                    time.sleep(self.backoff * 2 ** (attempt - 1))
                try:
                    if client is not None:
                        resp = client.post(url, json=arguments, headers=self.headers,
                                           timeout=self.timeout)
                    else:
                        resp = httpx.post(url, json=arguments, headers=self.headers,
                                          timeout=self.timeout)
                except httpx.HTTPError as exc:
                    detail = f"{type(exc).__name__}: {exc}"
                    log.warning("tool %s attempt %d failed: %s", tool, attempt + 1, detail)
                    continue
                if resp.status_code == 429 or resp.status_code >= 500:
                    detail = f"HTTP {resp.status_code}"
                    log.warning("tool %s attempt %d got %s", tool, attempt + 1, detail)
                    continue
                if resp.is_success:
                    return OK, resp.text, False
                return TOOL_ERROR, resp.text or f"HTTP {resp.status_code}", False
        return TOOL_ERROR, detail, True


Binding = Union[MockBinding, HttpBinding]


def _truncate(text: str, cap: int | None) -> str:
    if cap is None or len(text) <= cap:
        return text
    return text[:cap] + f"...[truncated {len(text) - cap} characters]"


class ToolRegistry:
    """Tool documents plus their execution bindings.

    Built once, then shared read-only by rollout workers; ``execute`` never
    mutates the registry.
    """

    def __init__(self, *, templates: ErrorTemplates | None = None,
                 observation_cap: int | None = DEFAULT_OBSERVATION_CAP,
                 clock: Callable[[], float] = time.perf_counter):
        self._docs: dict[str, ToolDoc] = {}
        self._bindings: dict[str, Binding] = {}
        self.templates = templates or ErrorTemplates()
        self.observation_cap = observation_cap
        self.clock = clock

    def register(self, doc: ToolDoc, binding: Binding) -> "ToolRegistry":
        if doc.name in self._docs:
            raise DuplicateTool(doc.name)
        self._docs[doc.name] = doc
        self._bindings[doc.name] = binding
        return self

    def lookup(self, name: str) -> ToolDoc:
        return self._docs[name]

    def binding(self, name: str) -> Binding:
        return self._bindings[name]

    def __contains__(self, name: object) -> bool:
        return name in self._docs

    def __len__(self) -> int:
        return len(self._docs)

    @property
    def docs(self) -> list[ToolDoc]:
        return list(self._docs.values())

    def subset(self, names: list[str]) -> "ToolRegistry":
        sub = ToolRegistry(templates=self.templates, observation_cap=self.observation_cap,
                           clock=self.clock)
        for name in names:
            sub.register(self._docs[name], self._bindings[name])
        return sub

    def execute(self, call: ToolCall) -> Observation:
        start = self.clock()
        status, text, transport = self._run(call)
        return Observation(_truncate(text, self.observation_cap), status,
                           self.clock() - start, transport)

    def _run(self, call: ToolCall) -> tuple[str, str, bool]:
        doc = self._docs.get(call.name)
        if doc is None:
            return NOT_FOUND, self.templates.wrap(
                call.name, self.templates.not_found.format(tool=call.name)), False
        violations = validate_call(call, doc)
        if violations:
            return SCHEMA_ERROR, self.templates.render(call.name, violations[0], doc), False
        binding = self._bindings[call.name]
        if isinstance(binding, HttpBinding):
            status, body, transport = binding.post(call.name, call.arguments)
            if transport:
                body = self.templates.wrap(call.name, self.templates.transport.format(detail=body))
            return status, body, transport
        arguments = {p.name: p.default for p in doc.params
                     if p.default is not None and p.name not in call.arguments}
        arguments.update(call.arguments)
        try:
            value = binding.fn(arguments)
        except builtins.ToolError as exc:
            return TOOL_ERROR, str(exc), False
        return OK, builtins.render_value(value), False

    # -- registry files -------------------------------------------------

    def to_json(self) -> dict[str, Any]:
        tools = []
        for name, doc in self._docs.items():
            entry = doc.to_json()
            binding = self._bindings[name]
            if isinstance(binding, MockBinding):
                if binding.builtin is None:
                    raise ValueError(f"{name}: ad-hoc mock functions cannot be serialized")
                entry["binding"] = {"mock": binding.builtin, **binding.config}
            else:
                entry["binding"] = {"http": binding.url_template, "timeout": binding.timeout,
                                    "retries": binding.retries}
            tools.append(entry)
        return {"tools": tools}

    @classmethod
    def from_json(cls, data: dict[str, Any], **kwargs: Any) -> "ToolRegistry":
        registry = cls(**kwargs)
        for entry in data["tools"]:
            doc = ToolDoc.from_json(entry)
            spec = dict(entry.get("binding") or {"mock": doc.name})
            if "mock" in spec:
                identifier = spec.pop("mock")
                binding: Binding = MockBinding.builtin_tool(identifier, spec)
            elif "http" in spec:
                binding = HttpBinding(spec["http"], timeout=float(spec.get("timeout", 30.0)),
                                      retries=int(spec.get("retries", 2)),
                                      max_in_flight=int(spec.get("max_in_flight", 8)))
            else:
                raise ValueError(f"{doc.name}: binding needs 'mock' or 'http'")
            registry.register(doc, binding)
        return registry

    @classmethod
    def load(cls, path: str | Path, **kwargs: Any) -> "ToolRegistry":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")), **kwargs)
