"""Batch scoring and evaluation over wire records.

The CLI and the HTTP service both call into this module, so a batch scored
from a file and the same batch posted to the service produce bit-identical
results. Per-item scoring faults never abort a batch: the item scores zero
and carries a diagnostic, because a training loop must not stall on one bad
sample.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .config import ToolkitConfig, load_config
from .evaluation import BenchmarkSample, EvalReport, evaluate_benchmark
from .parsing import interpret_object, tolerant_parse_object
from .rewards import RewardBreakdown, reward_mixed
from .schema import FunctionType, SignDecomposition


class MalformedLineError(ValueError):
    def __init__(self, path: str, line_number: int, message: str) -> None:
        super().__init__(f"{path}:{line_number}: {message}")
        self.path = path
        self.line_number = line_number


class MissingGroundTruthError(KeyError):
    pass


def read_jsonl(path: str | Path) -> list[dict]:
    """Read one JSON object per line; blank lines are skipped."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for number, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                record = json.loads(stripped)
            except ValueError as exc:
                raise MalformedLineError(str(path), number, str(exc)) from exc
            if not isinstance(record, dict):
                raise MalformedLineError(str(path), number, "line is not a JSON object")
            records.append(record)
    return records


def write_jsonl(records: Iterable[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def parse_ground_truth(
    text: str, config: ToolkitConfig
) -> Optional[SignDecomposition]:
    obj = tolerant_parse_object(text)
    if obj is None:
        return None
    decomposition, _ = interpret_object(obj, config.registry)
    return decomposition


def _breakdown_to_wire(item_id: object, breakdown: RewardBreakdown) -> dict:
    return {
        "id": item_id,
        "r_cfsu": breakdown.r_cfsu,
        "r_fsu": breakdown.r_fsu,
        "ted": breakdown.ted,
        "r_ted": breakdown.r_ted,
        "r_mixed": breakdown.r_mixed,
    }


def _zero_result(item_id: object, diagnostic: str) -> dict:
    return {
        "id": item_id,
        "r_cfsu": 0,
        "r_fsu": 0,
        "ted": None,
        "r_ted": 0.0,
        "r_mixed": 0.0,
        "diagnostic": diagnostic,
    }


def validate_score_item(item: object) -> Optional[str]:
    """Structural check of one wire record; None when acceptable."""
    if not isinstance(item, dict):
        return "item is not an object"
    for field in ("id", "response_text", "ground_truth"):
        if field not in item:
            return f"missing field {field!r}"
    if not isinstance(item["response_text"], str):
        return "response_text must be a string"
    if not isinstance(item["ground_truth"], str):
        return "ground_truth must be a string"
    return None


def score_items(items: Sequence[dict], config: Optional[ToolkitConfig] = None) -> list[dict]:
    """Score wire records {id, response_text, ground_truth} in order."""
    cfg = config or load_config()
    results = []
    for item in items:
        try:
            gt = parse_ground_truth(item["ground_truth"], cfg)
            if gt is None:
                results.append(_zero_result(item["id"], "ground truth is not parsable"))
                continue
            breakdown = reward_mixed(
                item["response_text"], gt, cfg.reward, lenient_format=cfg.lenient_format
            )
            results.append(_breakdown_to_wire(item["id"], breakdown))
        except Exception as exc:  # noqa: BLE001 - reward-on-error, keep the batch alive
            results.append(_zero_result(item.get("id"), f"scoring fault: {exc}"))
    return results


def validate_eval_item(item: object) -> Optional[str]:
    if not isinstance(item, dict):
        return "item is not an object"
    for field in ("id", "category", "response_text", "ground_truth"):
        if field not in item:
            return f"missing field {field!r}"
    try:
        FunctionType(item["category"])
    except ValueError:
        return f"unknown category {item['category']!r}"
    return None


def eval_items(items: Sequence[dict], config: Optional[ToolkitConfig] = None) -> EvalReport:
    """Evaluate wire records {id, category, response_text, ground_truth}."""
    cfg = config or load_config()
    samples = []
    for item in items:
        gt = parse_ground_truth(item["ground_truth"], cfg)
        if gt is None:
            raise ValueError(f"ground truth for {item['id']!r} is not parsable")
        samples.append(
            BenchmarkSample(
                id=str(item["id"]),
                category=FunctionType(item["category"]),
                raw=item["response_text"],
                gt=gt,
            )
        )
    return evaluate_benchmark(samples, cfg.eval, cfg.registry)
