"""Automatic structure-protocol evaluation.

A sample passes two gates. The top-level score is a weighted match over the
keys present in the ground truth (binary globals, Function Type, per-group
counts), compared strictly after normalization. The per-FSU score matches
ground-truth FSUs to predicted ones (Lane by position, other functions by
best assignment) and averages per-key indicators, where enumerated keys
need exact equality and free-text keys need string similarity above a
threshold. Unparsable predictions are always incorrect.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .assignment import linear_sum_assignment
from .parsing import extract_decomposition
from .schema import (
    COUNT_WEIGHT_KEY,
    FUNCTION_TYPE_KEY,
    GLOBAL_BINARY_KEYS,
    FsuEntry,
    FunctionType,
    KeyRegistry,
    SignDecomposition,
    default_registry,
)

DEFAULT_WEIGHTS: Mapping[str, float] = {
    FUNCTION_TYPE_KEY: 0.30,
    COUNT_WEIGHT_KEY: 0.30,
    "Traffic Sign": 0.10,
    "Electronic Sign": 0.075,
    "Obstruction": 0.075,
    "Truncation": 0.075,
    "Blur": 0.075,
}

# Fixed column order of the report table.
REPORT_COLUMNS = (
    FunctionType.DIRECTION,
    FunctionType.NOTICE,
    FunctionType.LANE,
    FunctionType.CONSTRUCTION,
)
_COLUMN_LABELS = {FunctionType.CONSTRUCTION: "Const."}


class DuplicateIdError(ValueError):
    """Two benchmark samples share an id."""


@dataclass(frozen=True)
class EvalConfig:
    """Weights and thresholds for the two-gate judgment."""

    weights: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    eps1: float = 0.8
    eps2: float = 0.5
    open_sim_threshold: float = 0.5
    strict_open_sim_threshold: float = 0.8
    similarity: str = "normalized_levenshtein"

    def __post_init__(self) -> None:
        total = sum(self.weights.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {total}")
        for name in ("eps1", "eps2", "open_sim_threshold", "strict_open_sim_threshold"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be within [0, 1], got {value}")

    @classmethod
    def preset(cls, name: str, **overrides) -> "EvalConfig":
        """Named presets: "supp" (threshold 0.5) or "strict" (0.8)."""
        if name == "supp":
            return cls(**overrides)
        if name == "strict":
            base = cls(**overrides)
            overrides = dict(overrides, open_sim_threshold=base.strict_open_sim_threshold)
            return cls(**overrides)
        raise ValueError(f"unknown preset {name!r}")


@dataclass(frozen=True)
class KeyDetail:
    path: str
    matched: bool
    similarity: float


@dataclass(frozen=True)
class SampleJudgment:
    score1: float
    score2: Optional[float]
    verdict: str  # "correct" | "incorrect"
    stage_failed: str  # "none" | "unparsable" | "score1" | "score2"
    per_key_detail: tuple[KeyDetail, ...] = ()


@dataclass(frozen=True)
class CategoryStats:
    n: int
    correct: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.n if self.n else 0.0


@dataclass(frozen=True)
class EvalReport:
    per_category: Mapping[FunctionType, CategoryStats]
    total_n: int
    total_correct: int

    @property
    def average(self) -> float:
        return self.total_correct / self.total_n if self.total_n else 0.0


@dataclass(frozen=True)
class BenchmarkSample:
    id: str
    category: FunctionType
    raw: str
    gt: SignDecomposition


def levenshtein(a: str, b: str) -> int:
    """Edit distance via the classic two-row dynamic program."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a):
        current = [i + 1]
        for j, cb in enumerate(b):
            current.append(
                min(previous[j + 1] + 1, current[j] + 1, previous[j] + (ca != cb))
            )
        previous = current
    return previous[-1]


def string_similarity(a: str, b: str) -> float:
    """Normalized similarity in [0, 1]; 1.0 when both strings are empty."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


def _top_level_items(d: SignDecomposition) -> list[tuple[str, str, str]]:
    """(weight key, path, value) triples for the present top-level keys."""
    items = []
    for key in GLOBAL_BINARY_KEYS:
        value = d.globals.get(key)
        if value is not None:
            items.append((key, key, value))
    function_type = d.function_type_text()
    if function_type is not None:
        items.append((FUNCTION_TYPE_KEY, FUNCTION_TYPE_KEY, function_type))
    for group in d.groups:
        if group.declared_count is not None:
            path = f"Number of {group.function.value} Information"
            items.append((COUNT_WEIGHT_KEY, path, str(group.declared_count)))
    return items


def _score_top_level(
    pred: SignDecomposition, gt: SignDecomposition, cfg: EvalConfig
) -> tuple[float, list[KeyDetail]]:
    gt_items = _top_level_items(gt)
    if not gt_items:
        return 1.0, []
    pred_values = {path: value for _, path, value in _top_level_items(pred)}
    details: list[KeyDetail] = []
    total_weight = 0.0
    matched_weight = 0.0
    for weight_key, path, value in gt_items:
        weight = cfg.weights.get(weight_key, 0.0)
        total_weight += weight
        matched = pred_values.get(path) == value
        if matched:
            matched_weight += weight
        details.append(KeyDetail(path=path, matched=matched, similarity=float(matched)))
    if total_weight <= 0.0:
        return 1.0, details
    return matched_weight / total_weight, details


def _entry_score(
    gt_entry: FsuEntry,
    pred_entry: Optional[FsuEntry],
    cfg: EvalConfig,
    registry: KeyRegistry,
    path: str,
) -> tuple[float, list[KeyDetail]]:
    keys = gt_entry.keys()
    if pred_entry is None:
        return 0.0, [KeyDetail(f"{path}.{k}", False, 0.0) for k in keys]
    if not keys:
        return 1.0, []
    details: list[KeyDetail] = []
    hits = 0
    for key, gt_value in gt_entry.attrs:
        pred_value = pred_entry.get(key)
        if pred_value is None:
            details.append(KeyDetail(f"{path}.{key}", False, 0.0))
            continue
        if registry.is_closed_set(gt_entry.function, key):
            matched = pred_value.joined() == gt_value.joined()
            similarity = float(matched)
        else:
            similarity = string_similarity(pred_value.joined(), gt_value.joined())
            matched = similarity >= cfg.open_sim_threshold
        hits += int(matched)
        details.append(KeyDetail(f"{path}.{key}", matched, similarity))
    return hits / len(keys), details


def _score_fsus(
    pred: SignDecomposition,
    gt: SignDecomposition,
    cfg: EvalConfig,
    registry: KeyRegistry,
) -> tuple[float, list[KeyDetail]]:
    gt_total = gt.total_entries()
    if gt_total == 0:
        return 1.0, []

    details: list[KeyDetail] = []
    score_sum = 0.0
    for group in gt.groups:
        pred_group = pred.group_for(group.function)
        pred_entries = pred_group.entries if pred_group else ()
        gname = f"{group.function.value} Information"

        if group.function == FunctionType.LANE:
            # Lanes read left to right: align by position, no reassignment.
            pairing = {
                i: pred_entries[i] if i < len(pred_entries) else None
                for i in range(len(group.entries))
            }
        else:
            pairing = {i: None for i in range(len(group.entries))}
            if group.entries and pred_entries:
                sims = [
                    [
                        _entry_score(g, p, cfg, registry, gname)[0]
                        for p in pred_entries
                    ]
                    for g in group.entries
                ]
                cost = [[1.0 - s for s in row] for row in sims]
                for gi, pj in linear_sum_assignment(cost).pairs:
                    pairing[gi] = pred_entries[pj]

        for i, entry in enumerate(group.entries):
            score, entry_details = _entry_score(
                entry, pairing[i], cfg, registry, f"{gname} {i + 1}"
            )
            score_sum += score
            details.extend(entry_details)

    return score_sum / gt_total, details


def score_top_level(
    pred: SignDecomposition, gt: SignDecomposition, cfg: EvalConfig = EvalConfig()
) -> float:
    """Weighted top-level key agreement, renormalized over GT-present keys."""
    return _score_top_level(pred, gt, cfg)[0]


def score_fsus(
    pred: SignDecomposition,
    gt: SignDecomposition,
    cfg: EvalConfig = EvalConfig(),
    registry: Optional[KeyRegistry] = None,
) -> float:
    """Mean per-FSU key agreement over the ground-truth FSUs."""
    return _score_fsus(pred, gt, cfg, registry or default_registry())[0]


def judge_sample(
    raw: str,
    gt: SignDecomposition,
    cfg: EvalConfig = EvalConfig(),
    registry: Optional[KeyRegistry] = None,
) -> SampleJudgment:
    """Two-gate judgment of one raw prediction against its ground truth."""
    reg = registry or default_registry()
    pred = extract_decomposition(raw, registry=reg)
    if pred is None:
        return SampleJudgment(
            score1=0.0, score2=None, verdict="incorrect", stage_failed="unparsable"
        )
    score1, details1 = _score_top_level(pred, gt, cfg)
    if score1 < cfg.eps1:
        return SampleJudgment(
            score1=score1,
            score2=None,
            verdict="incorrect",
            stage_failed="score1",
            per_key_detail=tuple(details1),
        )
    score2, details2 = _score_fsus(pred, gt, cfg, reg)
    passed = score2 >= cfg.eps2
    return SampleJudgment(
        score1=score1,
        score2=score2,
        verdict="correct" if passed else "incorrect",
        stage_failed="none" if passed else "score2",
        per_key_detail=tuple(details1 + details2),
    )


def evaluate_benchmark(
    samples: Sequence[BenchmarkSample],
    cfg: EvalConfig = EvalConfig(),
    registry: Optional[KeyRegistry] = None,
) -> EvalReport:
    """Judge every sample and aggregate per-category accuracy."""
    seen: set[str] = set()
    counts: dict[FunctionType, list[int]] = {}
    for sample in samples:
        if sample.id in seen:
            raise DuplicateIdError(f"duplicate sample id {sample.id!r}")
        seen.add(sample.id)
        judgment = judge_sample(sample.raw, sample.gt, cfg, registry)
        bucket = counts.setdefault(sample.category, [0, 0])
        bucket[0] += 1
        bucket[1] += int(judgment.verdict == "correct")

    per_category = {
        function: CategoryStats(n=n, correct=correct)
        for function, (n, correct) in counts.items()
    }
    total_n = sum(s.n for s in per_category.values())
    total_correct = sum(s.correct for s in per_category.values())
    return EvalReport(
        per_category=per_category, total_n=total_n, total_correct=total_correct
    )


def report_to_dict(report: EvalReport) -> dict:
    """Machine-readable report document."""
    return {
        "per_category": {
            function.value: {
                "n": stats.n,
                "correct": stats.correct,
                "accuracy": stats.accuracy,
            }
            for function, stats in report.per_category.items()
        },
        "total_n": report.total_n,
        "total_correct": report.total_correct,
        "average": report.average,
    }


def format_report_table(report: EvalReport) -> str:
    """Fixed-column accuracy table; absent categories print "-"."""
    headers = [_COLUMN_LABELS.get(f, f.value) for f in REPORT_COLUMNS] + ["Avg."]
    cells = []
    for function in REPORT_COLUMNS:
        stats = report.per_category.get(function)
        cells.append(f"{stats.accuracy * 100:.2f}" if stats else "-")
    cells.append(f"{report.average * 100:.2f}" if report.total_n else "-")
    widths = [max(len(h), len(c)) for h, c in zip(headers, cells)]
    header_row = "  ".join(h.rjust(w) for h, w in zip(headers, widths))
    value_row = "  ".join(c.rjust(w) for c, w in zip(cells, widths))
    return header_row + "\n" + value_row
