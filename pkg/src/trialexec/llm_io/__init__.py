from trialexec.llm_io.backends import (
    JUDGE_CONFIG,
    CallableBackend,
    ChatBackend,
    ChatMessage,
    DimensionMismatch,
    EmbeddingBackend,
    GenerationConfig,
    OpenAIChatBackend,
    OpenAIEmbeddingBackend,
    QueueBackend,
    RecordingBackend,
    ScriptedBackend,
    ScriptMiss,
    StubEmbeddingBackend,
    TransportError,
    complete,
    embed,
    fingerprint,
)
from trialexec.llm_io.judges import (
    ERROR_CLASSES,
    FAIL,
    PASS,
    UNCLASSIFIED,
    UNSURE,
    FilterVerdict,
    JudgeVerdict,
    judge_error_type,
    judge_filter,
    judge_passrate,
    parse_error_type_reply,
    parse_filter_reply,
    parse_passrate_reply,
)

__all__ = [
    "JUDGE_CONFIG", "CallableBackend", "ChatBackend", "ChatMessage", "DimensionMismatch",
    "EmbeddingBackend", "GenerationConfig", "OpenAIChatBackend", "OpenAIEmbeddingBackend",
    "QueueBackend", "RecordingBackend", "ScriptedBackend", "ScriptMiss",
    "StubEmbeddingBackend", "TransportError", "complete", "embed", "fingerprint",
    "ERROR_CLASSES", "FAIL", "PASS", "UNCLASSIFIED", "UNSURE", "FilterVerdict",
    "JudgeVerdict", "judge_error_type", "judge_filter", "judge_passrate",
    "parse_error_type_reply", "parse_filter_reply", "parse_passrate_reply",
]
