"""Loaders for the record shapes of the three public tool-use benchmarks.

Each loader yields BenchmarkItem values: the query, the tool docs offered
to the model, and whatever gold the benchmark provides. Fields are read
leniently since public dumps vary in key naming.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator

from trialexec.evaluation.metrics import GoldSpec
from trialexec.toolenv import ParamSpec, ToolDoc
from trialexec.toolenv.docs import normalize_kind


@dataclass(frozen=True)
class BenchmarkItem:
    query_id: str
    query: str
    tool_docs: tuple[ToolDoc, ...] = ()
    gold: GoldSpec | None = None


def read_records(path: str | Path) -> list[dict[str, Any]]:
    """A JSON array, a JSON object of records keyed by id, or JSONL."""
    text = Path(path).read_text(encoding="utf-8").strip()
    if not text:
        return []
    if text[0] == "[":
        return list(json.loads(text))
    if text[0] == "{":
        try:
            data = json.loads(text)
        except json.JSONDecodeError:
            pass
        else:
            if all(isinstance(v, dict) for v in data.values()):
                return [{"query_id": k, **v} for k, v in data.items()]
            return [data]
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def _kind(value: Any) -> str:
    try:
        return normalize_kind(str(value or "string"))
    except ValueError:
        return "string"


def doc_from_schema(schema: dict[str, Any]) -> ToolDoc:
    """ToolDoc from an OpenAI/JSON-schema style function description."""
    fn = schema.get("function", schema)
    parameters = fn.get("parameters") or {}
    required = set(parameters.get("required") or ())
    params = []
    for name, prop in (parameters.get("properties") or {}).items():
        kind = _kind(prop.get("type"))
        enum = prop.get("enum")
        params.append(ParamSpec(name, kind, name in required,
                                tuple(enum) if enum else None,
                                description=prop.get("description", "")))
    return ToolDoc(fn["name"], fn.get("description", ""), tuple(params))


def _first(record: dict[str, Any], *keys: str, default: Any = None) -> Any:
    for k in keys:
        if record.get(k) not in (None, ""):
            return record[k]
    return default


def load_toolhop(path: str | Path) -> Iterator[BenchmarkItem]:
    """Multi-hop records: question, answer, and the tools of the hop chain.

    Every tool shipped with a record is part of its chain, so the gold tool
    set is the set of provided tool names.
    """
    for i, rec in enumerate(read_records(path)):
        tools = rec.get("functions") or rec.get("tools") or []
        if isinstance(tools, dict):
            tools = list(tools.values())
        docs = tuple(doc_from_schema(t) for t in tools)
        answer = _first(rec, "answer", "gold_answer")
        names = frozenset(d.name for d in docs)
        qid = str(_first(rec, "query_id", "id", default=i))
        gold = GoldSpec(qid, str(answer) if answer is not None else None, names or None) \
            if answer is not None or names else None
        yield BenchmarkItem(qid, _first(rec, "question", "query", default=""), docs, gold)


def toolbench_name(tool_name: str, api_name: str) -> str:
    """Flattened function name used for a (tool, api) pair."""
    def clean(s: str) -> str:
        return "".join(c if c.isalnum() else "_" for c in s.lower()).strip("_")
    return f"{clean(api_name)}_for_{clean(tool_name)}"


def _toolbench_doc(api: dict[str, Any]) -> ToolDoc:
    params = []
    for group, required in (("required_parameters", True), ("optional_parameters", False)):
        for p in api.get(group) or ():
            default = p.get("default")
            kind = _kind(p.get("type"))
            params.append(ParamSpec(p["name"], kind, required,
                                    description=p.get("description", "") or "",
                                    default=default if kind == "string" and isinstance(default, str)
                                    and default else None))
    return ToolDoc(toolbench_name(api["tool_name"], api["api_name"]),
                   api.get("api_description", "") or "", tuple(params))


def load_stabletoolbench(path: str | Path) -> Iterator[BenchmarkItem]:
    """Instruction records with ``api_list`` and ``relevant APIs`` pairs.

    There is no gold answer; SoPR comes from the pass-rate judge. The
    relevant-API pairs become the gold tool set.
    """
    for i, rec in enumerate(read_records(path)):
        docs = tuple(_toolbench_doc(a) for a in rec.get("api_list") or ())
        relevant = rec.get("relevant APIs") or rec.get("relevant_apis") or []
        gold_tools = frozenset(toolbench_name(t, a) for t, a in relevant)
        qid = str(_first(rec, "query_id", "id", default=i))
        yield BenchmarkItem(qid, rec.get("query", ""), docs,
                            GoldSpec(qid, gold_tools=gold_tools) if gold_tools else None)


def load_tmdb(path: str | Path) -> Iterator[BenchmarkItem]:
    """RESTful records: ``query`` plus a ``solution`` list of "VERB /path" endpoints.

    Tool docs for this benchmark come from its OpenAPI file and are loaded
    separately into a registry.
    """
    for i, rec in enumerate(read_records(path)):
        solution = [" ".join(s.split()) for s in rec.get("solution") or ()]
        qid = str(_first(rec, "query_id", "id", default=i))
        yield BenchmarkItem(qid, rec.get("query", ""), (),
                            GoldSpec(qid, gold_tools=frozenset(solution)) if solution else None)


LOADERS = {"toolhop": load_toolhop, "stabletoolbench": load_stabletoolbench, "tmdb": load_tmdb}
