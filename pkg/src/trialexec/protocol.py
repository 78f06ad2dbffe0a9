"""Assistant-turn grammar: ``<think>``, ``<tool_call>``, ``<answer>``, ``<tool_response>``.

A strict-valid assistant turn is::

    ws* [ <think> TEXT </think> ] ws* ( <tool_call> JSON </tool_call> | <answer> TEXT </answer> ) ws*

where the tool-call body is an object ``{"name": str, "arguments": object}``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence, Union

THINK_OPEN, THINK_CLOSE = "<think>", "</think>"
CALL_OPEN, CALL_CLOSE = "<tool_call>", "</tool_call>"
ANSWER_OPEN, ANSWER_CLOSE = "<answer>", "</answer>"
RESPONSE_OPEN, RESPONSE_CLOSE = "<tool_response>", "</tool_response>"

RESERVED_TAGS = (
    THINK_OPEN, THINK_CLOSE, CALL_OPEN, CALL_CLOSE,
    ANSWER_OPEN, ANSWER_CLOSE, RESPONSE_OPEN, RESPONSE_CLOSE,
)
_PAIRS = {
    THINK_OPEN: ("think", THINK_CLOSE),
    CALL_OPEN: ("tool_call", CALL_CLOSE),
    ANSWER_OPEN: ("answer", ANSWER_CLOSE),
    RESPONSE_OPEN: ("tool_response", RESPONSE_CLOSE),
}
_TAG_RE = re.compile("|".join(re.escape(t) for t in RESERVED_TAGS))

DEFAULT_MAX_DEPTH = 8

# Violation codes, in reporting order.
MISSING_ANSWER = "MissingAnswer"
MULTIPLE_CALLS = "MultipleCalls"
MALFORMED_CALL_BODY = "MalformedCallBody"
TRAILING_CONTENT = "TrailingContent"
UNCLOSED_TAG = "UnclosedTag"
EMPTY_TURN = "EmptyTurn"
MISSING_THINK = "MissingThink"
VIOLATION_ORDER = (
    EMPTY_TURN, UNCLOSED_TAG, MALFORMED_CALL_BODY, MULTIPLE_CALLS,
    TRAILING_CONTENT, MISSING_ANSWER, MISSING_THINK,
)


class ProtocolError(ValueError):
    """Raised by strict parsing; ``code`` is one of the violation codes."""

    def __init__(self, code: str, message: str = ""):
        super().__init__(f"{code}: {message}" if message else code)
        self.code = code


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {"name": self.name, "arguments": self.arguments}


@dataclass(frozen=True)
class FinalAnswer:
    text: str


@dataclass(frozen=True)
class Bare:
    text: str


Payload = Union[ToolCall, FinalAnswer, Bare]


@dataclass(frozen=True)
class Segment:
    """A slice of the raw turn. ``text`` includes the tags themselves."""

    kind: str  # think | tool_call | answer | tool_response | text
    text: str


@dataclass(frozen=True)
class ParsedTurn:
    payload: Payload
    think: str | None = None
    segments: tuple[Segment, ...] = field(default=(), compare=False)

    @property
    def is_call(self) -> bool:
        return isinstance(self.payload, ToolCall)

    @property
    def is_answer(self) -> bool:
        return isinstance(self.payload, FinalAnswer)


@dataclass(frozen=True)
class FormatVerdict:
    violations: tuple[str, ...] = ()

    @property
    def well_formed(self) -> bool:
        return not self.violations


def _depth(value: Any) -> int:
    if isinstance(value, dict):
        return 1 + max((_depth(v) for v in value.values()), default=0)
    if isinstance(value, list):
        return 1 + max((_depth(v) for v in value), default=0)
    return 0


def _no_duplicates(pairs: list[tuple[str, Any]]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in pairs:
        if key in out:
            raise ValueError(f"duplicate key {key!r}")
        out[key] = value
    return out


def parse_call_body(body: str, max_depth: int = DEFAULT_MAX_DEPTH) -> ToolCall:
    """Decode a ``<tool_call>`` body; raises ProtocolError(MalformedCallBody)."""
    try:
        obj = json.loads(body, object_pairs_hook=_no_duplicates)
    except ValueError as exc:
        raise ProtocolError(MALFORMED_CALL_BODY, str(exc)) from None
    if not isinstance(obj, dict) or set(obj) != {"name", "arguments"}:
        raise ProtocolError(MALFORMED_CALL_BODY, "expected keys 'name' and 'arguments'")
    name, arguments = obj["name"], obj["arguments"]
    if not isinstance(name, str) or not name.strip():
        raise ProtocolError(MALFORMED_CALL_BODY, "'name' must be a non-empty string")
    if not isinstance(arguments, dict):
        raise ProtocolError(MALFORMED_CALL_BODY, "'arguments' must be an object")
    if _depth(arguments) > max_depth:
        raise ProtocolError(MALFORMED_CALL_BODY, f"argument nesting exceeds {max_depth}")
    return ToolCall(name, arguments)


def segment(raw: str) -> list[Segment]:
    """Split ``raw`` into tagged blocks and free text. Concatenation is lossless."""
    segments: list[Segment] = []
    pos = 0
    text_start = 0
    while True:
        m = _TAG_RE.search(raw, pos)
        if m is None:
            break
        tag = m.group(0)
        if tag in _PAIRS:
            kind, close = _PAIRS[tag]
            end = raw.find(close, m.end())
            if end != -1:
                if m.start() > text_start:
                    segments.append(Segment("text", raw[text_start:m.start()]))
                stop = end + len(close)
                segments.append(Segment(kind, raw[m.start():stop]))
                pos = text_start = stop
                continue
        pos = m.end()
    if text_start < len(raw):
        segments.append(Segment("text", raw[text_start:]))
    return segments


def _inner(seg: Segment) -> str:
    open_tag = next(t for t, (k, _) in _PAIRS.items() if k == seg.kind)
    return seg.text[len(open_tag):-len(_PAIRS[open_tag][1])]


def _analyze(raw: str, max_depth: int) -> tuple[ParsedTurn | None, list[str]]:
    """Strict analysis collecting every violation found."""
    violations: list[str] = []
    if not raw.strip():
        return None, [EMPTY_TURN]
    if raw.count(CALL_OPEN) >= 2:
        violations.append(MULTIPLE_CALLS)

    n = len(raw)

    def skip_ws(i: int) -> int:
        while i < n and raw[i].isspace():
            i += 1
        return i

    pos = skip_ws(0)
    think: str | None = None
    if raw.startswith(THINK_OPEN, pos):
        end = raw.find(THINK_CLOSE, pos + len(THINK_OPEN))
        if end == -1:
            return None, _ordered(violations + [UNCLOSED_TAG])
        think = raw[pos + len(THINK_OPEN):end]
        pos = skip_ws(end + len(THINK_CLOSE))

    payload: Payload | None = None
    if raw.startswith(CALL_OPEN, pos):
        end = raw.find(CALL_CLOSE, pos + len(CALL_OPEN))
        if end == -1:
            return None, _ordered(violations + [UNCLOSED_TAG])
        try:
            payload = parse_call_body(raw[pos + len(CALL_OPEN):end], max_depth)
        except ProtocolError:
            violations.append(MALFORMED_CALL_BODY)
        pos = skip_ws(end + len(CALL_CLOSE))
    elif raw.startswith(ANSWER_OPEN, pos):
        end = raw.find(ANSWER_CLOSE, pos + len(ANSWER_OPEN))
        if end == -1:
            return None, _ordered(violations + [UNCLOSED_TAG])
        payload = FinalAnswer(raw[pos + len(ANSWER_OPEN):end])
        pos = skip_ws(end + len(ANSWER_CLOSE))
    else:
        rest = raw[pos:]
        if CALL_OPEN in rest or ANSWER_OPEN in rest:
            violations.append(TRAILING_CONTENT)
        else:
            violations.append(MISSING_ANSWER)
        return None, _ordered(violations)

    if pos < n:
        rest = raw[pos:]
        if CALL_OPEN in rest and MULTIPLE_CALLS in violations:
            pass  # already reported
        else:
            violations.append(TRAILING_CONTENT)

    if violations or payload is None:
        return None, _ordered(violations or [MALFORMED_CALL_BODY])
    return ParsedTurn(payload, think, tuple(segment(raw))), []


def _ordered(codes: Iterable[str]) -> list[str]:
    seen = set(codes)
    return [c for c in VIOLATION_ORDER if c in seen]


def check_turn(raw: str, *, require_think: bool = False,
               max_depth: int = DEFAULT_MAX_DEPTH) -> FormatVerdict:
    """Strict-mode verdict for one assistant turn, listing all violations."""
    parsed, violations = _analyze(raw, max_depth)
    if require_think and parsed is not None and parsed.think is None:
        violations = violations + [MISSING_THINK]
    return FormatVerdict(tuple(_ordered(violations)))


def parse_turn(raw: str, mode: str = "strict", *,
               max_depth: int = DEFAULT_MAX_DEPTH) -> ParsedTurn:
    """Parse one assistant turn.

    Strict mode raises ProtocolError carrying the first violation. Lenient mode
    never raises: it salvages the first complete, decodable ``<tool_call>`` or
    else the first ``<answer>``, and falls back to ``Bare(raw)``.
    """
    if mode not in ("strict", "lenient"):
        raise ValueError(f"unknown parse mode {mode!r}")
    parsed, violations = _analyze(raw, max_depth)
    if parsed is not None:
        return parsed
    if mode == "strict":
        raise ProtocolError(violations[0])

    segments = tuple(segment(raw))
    think = next((_inner(s) for s in segments if s.kind == "think"), None)
    for seg in segments:
        if seg.kind == "tool_call":
            try:
                return ParsedTurn(parse_call_body(_inner(seg), max_depth), think, segments)
            except ProtocolError:
                continue
    for seg in segments:
        if seg.kind == "answer":
            return ParsedTurn(FinalAnswer(_inner(seg)), think, segments)
    return ParsedTurn(Bare(raw), think, segments)


def dump_call(call: ToolCall) -> str:
    # "<" only occurs inside JSON strings; escaping it keeps tag text in
    # argument values from being read as markup.
    return json.dumps(call.to_json(), ensure_ascii=False).replace("<", "\\u003c")


def _check_text(label: str, text: str) -> None:
    for tag in RESERVED_TAGS:
        if tag in text:
            raise ValueError(f"{label} text may not contain {tag}")


def render_turn(turn: ParsedTurn) -> str:
    """Canonical text for a ToolCall or FinalAnswer turn."""
    payload = turn.payload
    head = ""
    if turn.think is not None:
        _check_text("think", turn.think)
        head = f"{THINK_OPEN}{turn.think}{THINK_CLOSE}\n"
    if isinstance(payload, ToolCall):
        if not payload.name.strip():
            raise ValueError("tool name must be non-empty")
        return f"{head}{CALL_OPEN}{dump_call(payload)}{CALL_CLOSE}"
    if isinstance(payload, FinalAnswer):
        _check_text("answer", payload.text)
        return f"{head}{ANSWER_OPEN}{payload.text}{ANSWER_CLOSE}"
    raise ValueError("Bare turns cannot be rendered")


def wrap_observation(text: str) -> str:
    return f"{RESPONSE_OPEN}{text}{RESPONSE_CLOSE}"


def format_reward(turns: Sequence[str], *, require_think: bool = False,
                  max_depth: int = DEFAULT_MAX_DEPTH) -> tuple[int, list[FormatVerdict]]:
    """Binary format reward over a trajectory's assistant turns.

    Returns 1 iff every turn is strict-well-formed, every non-final turn is a
    tool call and the last turn is an answer. Verdicts are contextual: a
    trajectory that never answers gets MissingAnswer on its last turn, and
    turns following an answer get TrailingContent.
    """
    verdicts: list[FormatVerdict] = []
    answered_at: int | None = None
    for i, raw in enumerate(turns):
        parsed, violations = _analyze(raw, max_depth)
        if require_think and parsed is not None and parsed.think is None:
            violations.append(MISSING_THINK)
        last = i == len(turns) - 1
        if answered_at is not None:
            violations.append(TRAILING_CONTENT)
        if parsed is not None:
            if parsed.is_answer and answered_at is None:
                answered_at = i
            if last and not parsed.is_answer:
                violations.append(MISSING_ANSWER)
        verdicts.append(FormatVerdict(tuple(_ordered(violations))))
    if verdicts and answered_at is None and verdicts[-1].well_formed:
        verdicts[-1] = FormatVerdict((MISSING_ANSWER,))
    ok = bool(verdicts) and all(v.well_formed for v in verdicts)
    return int(ok), verdicts
