from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

KINDS = ("string", "integer", "number", "boolean", "array", "object")

# Loose aliases seen in benchmark dumps ("STRING", "str", "int", ...).
_KIND_ALIASES = {
    "str": "string", "string": "string", "text": "string",
    "int": "integer", "integer": "integer",
    "float": "number", "number": "number", "double": "number",
    "bool": "boolean", "boolean": "boolean",
    "list": "array", "array": "array",
    "dict": "object", "object": "object", "map": "object",
}


def normalize_kind(kind: str) -> str:
    try:
        return _KIND_ALIASES[kind.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown parameter kind {kind!r}") from None


def kind_matches(kind: str, value: Any) -> bool:
    if kind == "string":
        return isinstance(value, str)
    if kind == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == "boolean":
        return isinstance(value, bool)
    if kind == "array":
        return isinstance(value, list)
    if kind == "object":
        return isinstance(value, dict)
    raise ValueError(f"unknown parameter kind {kind!r}")


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str = "string"
    required: bool = False
    enum_values: tuple[Any, ...] | None = None
    default: Any = None
    description: str = ""

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("parameter name must be non-empty")
        object.__setattr__(self, "kind", normalize_kind(self.kind))
        if self.enum_values is not None:
            values = tuple(self.enum_values)
            if not values:
                raise ValueError(f"{self.name}: enum must be non-empty")
            if not all(kind_matches(self.kind, v) for v in values):
                raise ValueError(f"{self.name}: enum values must be of kind {self.kind}")
            object.__setattr__(self, "enum_values", values)
        if self.default is not None and not kind_matches(self.kind, self.default):
            raise ValueError(f"{self.name}: default must be of kind {self.kind}")

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"name": self.name, "kind": self.kind, "required": self.required}
        if self.enum_values is not None:
            out["enum"] = list(self.enum_values)
        if self.default is not None:
            out["default"] = self.default
        if self.description:
            out["description"] = self.description
        return out

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "ParamSpec":
        enum = data.get("enum")
        return cls(
            name=data["name"],
            kind=data.get("kind", "string"),
            required=bool(data.get("required", False)),
            enum_values=tuple(enum) if enum is not None else None,
            default=data.get("default"),
            description=data.get("description", ""),
        )


@dataclass(frozen=True)
class ToolDoc:
    name: str
    description: str = ""
    params: tuple[ParamSpec, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("tool name must be non-empty")
        object.__setattr__(self, "params", tuple(self.params))
        names = [p.name for p in self.params]
        if len(names) != len(set(names)):
            raise ValueError(f"{self.name}: duplicate parameter names")

    def param(self, name: str) -> ParamSpec | None:
        return next((p for p in self.params if p.name == name), None)

    def to_json(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "description": self.description,
            "params": [p.to_json() for p in self.params],
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "ToolDoc":
        return cls(
            name=data["name"],
            description=data.get("description", ""),
            params=tuple(ParamSpec.from_json(p) for p in data.get("params", [])),
        )

    def function_schema(self) -> dict[str, Any]:
        """OpenAI-style function signature, as shown to the model inside ``<tools>``."""
        properties: dict[str, Any] = {}
        for p in self.params:
            prop: dict[str, Any] = {"type": p.kind}
            if p.description:
                prop["description"] = p.description
            if p.enum_values is not None:
                prop["enum"] = list(p.enum_values)
            if p.default is not None:
                prop["default"] = p.default
            properties[p.name] = prop
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": {
                    "type": "object",
                    "properties": properties,
                    "required": [p.name for p in self.params if p.required],
                },
            },
        }
