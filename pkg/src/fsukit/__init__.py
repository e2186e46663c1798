"""fsukit: traffic-sign FSU parsing, tree-edit-distance rewards, and
structure-protocol evaluation."""

from .assignment import AssignmentResult, NonFiniteEntryError, linear_sum_assignment
from .evaluation import (
    BenchmarkSample,
    CategoryStats,
    DuplicateIdError,
    EvalConfig,
    EvalReport,
    KeyDetail,
    SampleJudgment,
    evaluate_benchmark,
    format_report_table,
    judge_sample,
    levenshtein,
    report_to_dict,
    score_fsus,
    score_top_level,
    string_similarity,
)
from .parsing import (
    ModelResponse,
    extract_decomposition,
    interpret_object,
    parse_response,
    reward_caption_fsu_format,
    reward_fsu_parsable,
    tolerant_parse_object,
)
from .rewards import (
    RewardBreakdown,
    RewardConfig,
    distance_to_reward,
    reward_mixed,
    tree_edit_distance,
)
from .schema import (
    AttrValue,
    FsuEntry,
    FsuGroup,
    FunctionType,
    GlobalAttributes,
    KeyRegistry,
    SignDecomposition,
    Violation,
    canonical_attr_order,
    canonical_serialize,
    default_registry,
    normalize_text,
    validate,
)
from .tree import TreeNode, build_tree, dump_tree, subtree_size

__version__ = "0.1.0"

__all__ = [
    "AssignmentResult",
    "AttrValue",
    "BenchmarkSample",
    "CategoryStats",
    "DuplicateIdError",
    "EvalConfig",
    "EvalReport",
    "FsuEntry",
    "FsuGroup",
    "FunctionType",
    "GlobalAttributes",
    "KeyDetail",
    "KeyRegistry",
    "ModelResponse",
    "NonFiniteEntryError",
    "RewardBreakdown",
    "RewardConfig",
    "SampleJudgment",
    "SignDecomposition",
    "TreeNode",
    "Violation",
    "build_tree",
    "canonical_attr_order",
    "canonical_serialize",
    "default_registry",
    "distance_to_reward",
    "dump_tree",
    "evaluate_benchmark",
    "extract_decomposition",
    "format_report_table",
    "interpret_object",
    "judge_sample",
    "levenshtein",
    "linear_sum_assignment",
    "normalize_text",
    "parse_response",
    "report_to_dict",
    "reward_caption_fsu_format",
    "reward_fsu_parsable",
    "reward_mixed",
    "score_fsus",
    "score_top_level",
    "string_similarity",
    "subtree_size",
    "tolerant_parse_object",
    "tree_edit_distance",
    "validate",
]
