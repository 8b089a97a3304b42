"""treescore: a weighted evaluation-tree scoring engine for long-form
machine-generated writing, with baseline metrics, meta-evaluation
statistics and a robustness perturbation harness."""

from .data import (
    GenerationRecord,
    GenreRegistry,
    HumanRating,
    TaskType,
    WritingTask,
    char_length,
    compute_stats,
    load_generations,
    load_ratings,
    load_tasks,
)
from .format_rules import FormatVerdict, HeadingNode, check_formatting, parse_headings
from .judge import (
    CostLedger,
    JudgeClient,
    JudgeRequest,
    JudgeResponse,
    PriceTable,
    ResponseCache,
    ScriptedBackend,
    report_cost,
)
from .negotiator import (
    WeightPlan,
    WeightSource,
    build_weight_prompt,
    negotiate,
    parse_weights,
    validate_weights,
)
from .tree import (
    AblationMode,
    EvalTree,
    Family,
    LeafJudgment,
    LeafTrait,
    ScoreCard,
    WeightVector,
    ablate,
    aggregate_primary,
    aggregate_root,
    evaluate_sample,
    load_scorecards,
)

__version__ = "0.1.0"

__all__ = [
    "AblationMode",
    "CostLedger",
    "EvalTree",
    "Family",
    "FormatVerdict",
    "GenerationRecord",
    "GenreRegistry",
    "HeadingNode",
    "HumanRating",
    "JudgeClient",
    "JudgeRequest",
    "JudgeResponse",
    "LeafJudgment",
    "LeafTrait",
    "PriceTable",
    "ResponseCache",
    "ScoreCard",
    "ScriptedBackend",
    "TaskType",
    "WeightPlan",
    "WeightSource",
    "WeightVector",
    "WritingTask",
    "ablate",
    "aggregate_primary",
    "aggregate_root",
    "build_weight_prompt",
    "char_length",
    "check_formatting",
    "compute_stats",
    "evaluate_sample",
    "load_generations",
    "load_ratings",
    "load_scorecards",
    "load_tasks",
    "negotiate",
    "parse_headings",
    "parse_weights",
    "report_cost",
    "validate_weights",
    "__version__",
]
