"""Tool environment: documents, validation, and execution backends."""

from trialexec.toolenv.builtins import ToolError
from trialexec.toolenv.docs import KINDS, ParamSpec, ToolDoc
from trialexec.toolenv.registry import (
    ENUM_VIOLATION,
    KIND_MISMATCH,
    MISSING_REQUIRED,
    NOT_FOUND,
    OK,
    SCHEMA_ERROR,
    TOOL_ERROR,
    UNKNOWN_ARGUMENT,
    DuplicateTool,
    ErrorTemplates,
    HttpBinding,
    MockBinding,
    Observation,
    SchemaViolation,
    ToolRegistry,
    validate_call,
)

__all__ = [
    "KINDS", "ParamSpec", "ToolDoc", "ToolError",
    "OK", "TOOL_ERROR", "NOT_FOUND", "SCHEMA_ERROR",
    "UNKNOWN_ARGUMENT", "MISSING_REQUIRED", "KIND_MISMATCH", "ENUM_VIOLATION",
    "DuplicateTool", "ErrorTemplates", "HttpBinding", "MockBinding",
    "Observation", "SchemaViolation", "ToolRegistry", "validate_call",
]
