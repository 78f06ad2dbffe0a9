from trialexec.evaluation.benchmarks import (
    LOADERS,
    BenchmarkItem,
    doc_from_schema,
    load_stabletoolbench,
    load_tmdb,
    load_toolhop,
    read_records,
)
from trialexec.evaluation.metrics import (
    SOLVED,
    STATUS_TO_VERDICT,
    UNSOLVED,
    VERDICTS,
    EvalRecord,
    GoldSpec,
    answer_correct,
    avg_tool_calls,
    called_tools,
    classify_error,
    correct_path_rate,
    cumulative_correctness_curve,
    error_distribution,
    heuristic_error_class,
    is_failed_observation,
    normalize_text,
    sopr,
)

__all__ = [
    "LOADERS", "BenchmarkItem", "doc_from_schema", "load_stabletoolbench", "load_tmdb",
    "load_toolhop", "read_records",
    "SOLVED", "STATUS_TO_VERDICT", "UNSOLVED", "VERDICTS", "EvalRecord", "GoldSpec",
    "answer_correct", "avg_tool_calls", "called_tools", "classify_error",
    "correct_path_rate", "cumulative_correctness_curve", "error_distribution",
    "heuristic_error_class", "is_failed_observation", "normalize_text", "sopr",
]
