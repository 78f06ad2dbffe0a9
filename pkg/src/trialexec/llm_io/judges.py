"""Judge calls and total reply parsers.

Every parser maps any string to a verdict or a defined fallback; transport
failures are the only exceptions that escape the ``judge_*`` functions.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any

from trialexec.llm_io import prompts
from trialexec.llm_io.backends import JUDGE_CONFIG, ChatBackend, ChatMessage, GenerationConfig

PASS, FAIL, UNSURE = "Pass", "Fail", "Unsure"
ERROR_CLASSES = ("I", "II", "III")
UNCLASSIFIED = "Unclassified"
UNPARSEABLE = "unparseable"


@dataclass(frozen=True)
class JudgeVerdict:
    status: str
    rationale: str = ""


@dataclass(frozen=True)
class FilterVerdict:
    keep: bool
    analysis: str = ""
    parsed: bool = True


def json_objects(text: str) -> list[dict[str, Any]]:
    """Top-level JSON objects embedded in ``text``, in order of appearance."""
    decoder = json.JSONDecoder()
    found = []
    i = text.find("{")
    while i != -1:
        try:
            obj, end = decoder.raw_decode(text, i)
        except ValueError:
            i = text.find("{", i + 1)
            continue
        if isinstance(obj, dict):
            found.append(obj)
        i = text.find("{", end)
    return found


def last_json_object(text: str) -> dict[str, Any] | None:
    objs = json_objects(text)
    return objs[-1] if objs else None


def parse_passrate_reply(reply: str) -> JudgeVerdict:
    obj = last_json_object(reply or "")
    status = obj.get("answer_status") if obj else None
    if isinstance(status, str):
        for canonical in (PASS, FAIL, UNSURE):
            if status.strip().lower() == canonical.lower():
                rationale = obj.get("content", "")
                return JudgeVerdict(canonical, rationale if isinstance(rationale, str) else json.dumps(rationale))
    return JudgeVerdict(UNSURE, UNPARSEABLE)


_RESULT_RE = re.compile(r"result\W{0,6}(true|false)\b", re.IGNORECASE)
_ANALYSIS_RE = re.compile(r"analysis\W{0,6}(.*?)(?=\W{0,6}result\W{0,6}(?:true|false)\b|\Z)",
                          re.IGNORECASE | re.DOTALL)


def parse_filter_reply(reply: str) -> FilterVerdict:
    reply = reply or ""
    matches = _RESULT_RE.findall(reply)
    if not matches:
        return FilterVerdict(False, f"{UNPARSEABLE}: {reply[:200]}", parsed=False)
    m = _ANALYSIS_RE.search(reply)
    analysis = m.group(1).strip() if m else reply.strip()
    return FilterVerdict(matches[-1].lower() == "true", analysis)


def parse_error_type_reply(reply: str) -> str:
    obj = last_json_object(reply or "")
    code = obj.get("category_code") if obj else None
    if isinstance(code, str) and code.strip().upper() in ERROR_CLASSES:
        return code.strip().upper()
    return UNCLASSIFIED


def _ask(backend: ChatBackend, system: str, user: str, config: GenerationConfig) -> str:
    return backend.complete([ChatMessage("system", system), ChatMessage("user", user)], config)


def judge_passrate(backend: ChatBackend, query: str, final_answer: str, execution_chain: str,
                   config: GenerationConfig = JUDGE_CONFIG) -> JudgeVerdict:
    user = prompts.render(prompts.PASS_RATE_INPUT, query=query, final_answer=final_answer,
                          execution_chain=execution_chain)
    return parse_passrate_reply(_ask(backend, prompts.PASS_RATE_PROMPT, user, config))


def judge_filter(backend: ChatBackend, transcript: str,
                 config: GenerationConfig = JUDGE_CONFIG) -> FilterVerdict:
    user = prompts.render(prompts.FILTER_INPUT, transcript=transcript)
    return parse_filter_reply(_ask(backend, prompts.TRAJECTORY_FILTER_PROMPT, user, config))


def judge_error_type(backend: ChatBackend, question: str, ground_truth: str, response: str,
                     config: GenerationConfig = JUDGE_CONFIG) -> str:
    user = prompts.render(prompts.ERROR_TYPE_INPUT, question=question,
                          ground_truth=ground_truth, response=response)
    return parse_error_type_reply(_ask(backend, prompts.ERROR_TYPE_PROMPT, user, config))
