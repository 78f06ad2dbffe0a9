"""Deterministic mock tools: string ops, arithmetic, and lookup tables.

Every builtin is a pure function of its argument map. Builtins are referenced
from registry files by identifier; ``lookup`` is a factory configured by the
binding (see ``make_lookup``).
"""

from __future__ import annotations

import json
from typing import Any, Callable

MockFn = Callable[[dict[str, Any]], Any]


class ToolError(Exception):
    """Raised by a mock tool; the message becomes a tool_error observation."""


def _text_arg(args: dict[str, Any], *names: str) -> str:
    for name in names:
        if name in args:
            value = args[name]
            if not isinstance(value, str):
                raise ToolError(f"Error: '{name}' must be a string.")
            return value
    raise ToolError(f"Error: missing argument '{names[0]}'.")


def count_letters(args: dict[str, Any]) -> int:
    return sum(ch.isalpha() for ch in _text_arg(args, "input", "text"))


def extract_first_name(args: dict[str, Any]) -> str:
    names = args.get("full_names", args.get("names"))
    if isinstance(names, str):
        names = [names]
    if not isinstance(names, list) or not names:
        raise ToolError("Error: 'full_names' must be a non-empty list of names.")
    firsts = [n.split()[0] if isinstance(n, str) and n.split() else "" for n in names]
    return ", ".join(firsts)


def extract_first_letter(args: dict[str, Any]) -> str:
    text = _text_arg(args, "input")
    if args.get("ignore_whitespace", True):
        text = text.lstrip()
    if args.get("ignore_non_alphabetic", False):
        text = "".join(ch for ch in text if ch.isalpha())
    return text[:1]


def string_length(args: dict[str, Any]) -> int:
    return len(_text_arg(args, "input", "text"))


def to_upper(args: dict[str, Any]) -> str:
    return _text_arg(args, "input", "text").upper()


def to_lower(args: dict[str, Any]) -> str:
    return _text_arg(args, "input", "text").lower()


def reverse_string(args: dict[str, Any]) -> str:
    return _text_arg(args, "input", "text")[::-1]


def concatenate(args: dict[str, Any]) -> str:
    parts = args.get("strings")
    if not isinstance(parts, list) or not all(isinstance(p, str) for p in parts):
        raise ToolError("Error: 'strings' must be a list of strings.")
    return str(args.get("separator", "")).join(parts)


def _numbers(args: dict[str, Any]) -> list[float]:
    nums = args.get("numbers")
    if not isinstance(nums, list) or not nums:
        raise ToolError("Error: 'numbers' must be a non-empty list.")
    if not all(isinstance(n, (int, float)) and not isinstance(n, bool) for n in nums):
        raise ToolError("Error: 'numbers' must contain only numbers.")
    return nums


_OPS = {
    "add": "+", "addition": "+", "+": "+",
    "subtract": "-", "subtraction": "-", "-": "-",
    "multiply": "*", "multiplication": "*", "*": "*",
    "divide": "/", "division": "/", "/": "/",
}


def arithmetic(args: dict[str, Any]) -> float | int:
    op = _OPS.get(str(args.get("operation", "")).lower())
    if op is None:
        raise ToolError(f"Error: unsupported operation {args.get('operation')!r}.")
    nums = _numbers(args)
    result = nums[0]
    for n in nums[1:]:
        if op == "+":
            result += n
        elif op == "-":
            result -= n
        elif op == "*":
            result *= n
        else:
            if n == 0:
                raise ToolError("Error: division by zero.")
            result /= n
    if isinstance(result, float) and result.is_integer():
        return int(result)
    return result


BUILTINS: dict[str, MockFn] = {
    "count_letters": count_letters,
    "extract_first_name": extract_first_name,
    "extract_first_letter": extract_first_letter,
    "string_length": string_length,
    "to_upper": to_upper,
    "to_lower": to_lower,
    "reverse_string": reverse_string,
    "concatenate": concatenate,
    "arithmetic": arithmetic,
}


class _Defaults(dict):
    def __missing__(self, key: str) -> str:
        return ""


def make_lookup(config: dict[str, Any]) -> MockFn:
    """Table-driven tool.

    ``config`` keys: ``keys`` (argument names forming the lookup key, joined
    with ``|``), ``table`` (key -> value), and ``missing`` which is either
    ``{"error": template}`` (raise a tool error) or ``{"text": template}``
    (return the text). Templates may reference argument names.
    """
    keys = list(config["keys"])
    table = dict(config.get("table", {}))
    missing = dict(config.get("missing", {"error": "Error: no data found."}))

    def lookup(args: dict[str, Any]) -> Any:
        key = "|".join(str(args.get(k, "")) for k in keys)
        if key in table:
            return table[key]
        fields = _Defaults({k: str(v) for k, v in args.items()})
        if "error" in missing:
            raise ToolError(missing["error"].format_map(fields))
        return missing.get("text", "").format_map(fields)

    return lookup


FACTORIES: dict[str, Callable[[dict[str, Any]], MockFn]] = {"lookup": make_lookup}


def resolve(identifier: str, config: dict[str, Any] | None = None) -> MockFn:
    if identifier in FACTORIES:
        return FACTORIES[identifier](config or {})
    try:
        return BUILTINS[identifier]
    except KeyError:
        raise KeyError(f"unknown builtin tool {identifier!r}") from None


def render_value(value: Any) -> str:
    if isinstance(value, str):
        return value
    return json.dumps(value, ensure_ascii=False)
