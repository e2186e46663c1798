"""Command-line interface: validation, batch scoring, benchmark evaluation,
dataset building, the distillation loop, and the reward service."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import distill as distill_mod
from .batch import (
    MalformedLineError,
    eval_items,
    parse_ground_truth,
    read_jsonl,
    score_items,
    write_jsonl,
)
from .config import ToolkitConfig, load_config
from .evaluation import format_report_table, report_to_dict
from .parsing import extract_decomposition
from .rewards import distance_to_reward, tree_edit_distance
from .schema import validate
from .tree import build_tree, dump_tree

EX_USAGE = 64
EX_DATA = 2


def _fail(message: str, code: int = EX_DATA) -> None:
    click.echo(message, err=True)
    sys.exit(code)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON config overlaying the packaged defaults.")
@click.option("--preset", type=click.Choice(["supp", "strict"]), default="supp",
              show_default=True, help="Open-set similarity threshold preset.")
@click.option("--sigma1", type=float, default=None, help="Reward activation sigma1.")
@click.option("--sigma2", type=float, default=None, help="Reward activation sigma2.")
@click.option("--sigma3", type=float, default=None, help="Reward activation sigma3.")
@click.pass_context
def main(ctx, config_path, preset, sigma1, sigma2, sigma3):
    """Traffic-sign FSU toolkit."""
    ctx.obj = load_config(
        config_path, preset=preset, sigma1=sigma1, sigma2=sigma2, sigma3=sigma3
    )


def _load_lines(path: str) -> list[dict]:
    try:
        return read_jsonl(path)
    except MalformedLineError as exc:
        _fail(f"malformed line: {exc}")
    except OSError as exc:
        _fail(f"cannot read {path}: {exc}")
    raise AssertionError("unreachable")


@main.command()
@click.argument("input_file", type=click.Path(exists=True))
@click.pass_obj
def check(cfg: ToolkitConfig, input_file: str):
    """Validate annotations: JSONL lines {"id", "fsu"} of dictionary text."""
    rows = _load_lines(input_file)
    problems = 0
    for row in rows:
        if "id" not in row or "fsu" not in row:
            _fail(f"{input_file}: every line needs 'id' and 'fsu' fields")
        decomposition = parse_ground_truth(row["fsu"], cfg)
        if decomposition is None:
            click.echo(f"{row['id']}: not parsable")
            problems += 1
            continue
        violations = validate(decomposition, cfg.registry)
        for violation in violations:
            click.echo(f"{row['id']}: [{violation.code}] {violation.path}: {violation.message}")
        problems += len(violations)
    click.echo(f"{len(rows)} records checked, {problems} problems", err=True)
    sys.exit(0 if problems == 0 else 1)


@main.command()
@click.option("--pred", "pred_file", required=True, type=click.Path(exists=True),
              help="JSONL of {id, response_text}.")
@click.option("--gt", "gt_file", required=True, type=click.Path(exists=True),
              help="JSONL of {id, ground_truth}.")
@click.option("--out", "out_file", required=True, type=click.Path(),
              help="Output JSONL of score results.")
@click.pass_obj
def score(cfg: ToolkitConfig, pred_file: str, gt_file: str, out_file: str):
    """Score predictions against ground truth, one result line per prediction."""
    preds = _load_lines(pred_file)
    gts = _load_lines(gt_file)
    gt_by_id: dict = {}
    for row in gts:
        if "id" not in row or "ground_truth" not in row:
            _fail(f"{gt_file}: every line needs 'id' and 'ground_truth' fields")
        if row["id"] in gt_by_id:
            _fail(f"{gt_file}: duplicate ground-truth id {row['id']!r}")
        gt_by_id[row["id"]] = row["ground_truth"]

    items = []
    for row in preds:
        if "id" not in row or "response_text" not in row:
            _fail(f"{pred_file}: every line needs 'id' and 'response_text' fields")
        if row["id"] not in gt_by_id:
            _fail(f"missing ground truth for id {row['id']!r}")
        items.append(
            {
                "id": row["id"],
                "response_text": row["response_text"],
                "ground_truth": gt_by_id[row["id"]],
            }
        )

    write_jsonl(score_items(items, cfg), out_file)
    click.echo(f"scored {len(items)} predictions -> {out_file}", err=True)


@main.command(name="eval")
@click.option("--pred", "pred_file", required=True, type=click.Path(exists=True),
              help="JSONL of {id, response_text}.")
@click.option("--gt", "gt_file", required=True, type=click.Path(exists=True),
              help="JSONL of {id, category, ground_truth}.")
@click.option("--out", "out_file", default=None, type=click.Path(),
              help="Optional JSON report path.")
@click.pass_obj
def eval_command(cfg: ToolkitConfig, pred_file: str, gt_file: str, out_file: str | None):
    """Evaluate predictions and print the per-category accuracy table."""
    preds = _load_lines(pred_file)
    gts = _load_lines(gt_file)
    gt_by_id: dict = {}
    for row in gts:
        for field in ("id", "category", "ground_truth"):
            if field not in row:
                _fail(f"{gt_file}: every line needs an {field!r} field")
        if row["id"] in gt_by_id:
            _fail(f"{gt_file}: duplicate ground-truth id {row['id']!r}")
        gt_by_id[row["id"]] = row

    items = []
    for row in preds:
        if "id" not in row or "response_text" not in row:
            _fail(f"{pred_file}: every line needs 'id' and 'response_text' fields")
        gt_row = gt_by_id.get(row["id"])
        if gt_row is None:
            _fail(f"missing ground truth for id {row['id']!r}")
        items.append(
            {
                "id": row["id"],
                "category": gt_row["category"],
                "response_text": row["response_text"],
                "ground_truth": gt_row["ground_truth"],
            }
        )

    try:
        report = eval_items(items, cfg)
    except ValueError as exc:
        _fail(str(exc))
        raise AssertionError("unreachable")
    click.echo(format_report_table(report))
    if out_file:
        Path(out_file).write_text(
            json.dumps(report_to_dict(report), ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )
        click.echo(f"report written to {out_file}", err=True)


@main.command()
@click.argument("file_a", type=click.Path(exists=True))
@click.argument("file_b", type=click.Path(exists=True))
@click.option("--dump-trees", is_flag=True, help="Print both trees before the distance.")
@click.pass_obj
def ted(cfg: ToolkitConfig, file_a: str, file_b: str, dump_trees: bool):
    """Tree edit distance between two decomposition texts (or responses)."""
    decompositions = []
    for path in (file_a, file_b):
        text = Path(path).read_text(encoding="utf-8")
        decomposition = extract_decomposition(text, cfg.registry)
        if decomposition is None:
            _fail(f"{path}: not parsable as a decomposition")
        decompositions.append(decomposition)
    tree_a, tree_b = (build_tree(d) for d in decompositions)
    if dump_trees:
        click.echo(dump_tree(tree_a))
        click.echo("--")
        click.echo(dump_tree(tree_b))
    distance = tree_edit_distance(tree_a, tree_b)
    click.echo(f"ted: {distance}")
    click.echo(f"r_ted: {distance_to_reward(distance, cfg.reward)}")


def _load_annotations(path: str, cfg: ToolkitConfig) -> list[distill_mod.Annotation]:
    rows = _load_lines(path)
    annotations = []
    for row in rows:
        if "image" not in row or "fsu" not in row:
            _fail(f"{path}: every line needs 'image' and 'fsu' fields")
        gt = parse_ground_truth(row["fsu"], cfg)
        if gt is None:
            _fail(f"{path}: annotation for {row['image']!r} is not parsable")
        annotations.append(distill_mod.Annotation(image_ref=row["image"], gt=gt))
    return annotations


@main.command(name="build-sft")
@click.option("--annotations", "annotations_file", required=True,
              type=click.Path(exists=True), help="JSONL of {image, fsu}.")
@click.option("--captions", "captions_file", default=None, type=click.Path(exists=True),
              help="JSONL of {image, caption}; required for the cap_fsu format.")
@click.option("--out", "out_file", required=True, type=click.Path())
@click.option("--formats", default="cap_fsu,reason", show_default=True,
              help="Comma-separated record formats to emit.")
@click.pass_obj
def build_sft(cfg: ToolkitConfig, annotations_file, captions_file, out_file, formats):
    """Assemble SFT records from annotations plus harvested captions."""
    format_list = tuple(f.strip() for f in formats.split(",") if f.strip())
    annotations = _load_annotations(annotations_file, cfg)
    captions: list[distill_mod.CaptionResult] = []
    if "cap_fsu" in format_list:
        if captions_file is None:
            _fail("--captions is required when the cap_fsu format is requested", EX_USAGE)
        for row in _load_lines(captions_file):
            if "image" not in row or "caption" not in row:
                _fail(f"{captions_file}: every line needs 'image' and 'caption' fields")
            captions.append(
                distill_mod.CaptionResult(image_ref=row["image"], caption=row["caption"], ok=True)
            )
    try:
        records, failures = distill_mod.assemble_sft(
            captions, annotations, formats=format_list, registry=cfg.registry
        )
    except ValueError as exc:
        _fail(str(exc), EX_USAGE)
        raise AssertionError("unreachable")
    distill_mod.write_sft_jsonl(records, out_file)
    for failure in failures:
        click.echo(f"skipped {failure.image_ref}: {failure.reason}", err=True)
    click.echo(f"wrote {len(records)} records -> {out_file}", err=True)
    if failures:
        sys.exit(1)


@main.command()
@click.option("--annotations", "annotations_file", required=True,
              type=click.Path(exists=True), help="JSONL of {image, fsu}.")
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--iterations", type=int, default=2, show_default=True,
              help="Final round index; rounds 0..N inclusive are produced.")
@click.option("--mock", is_flag=True, help="Use the deterministic canned client.")
@click.option("--endpoint", default=None, help="Chat-completion endpoint URL.")
@click.option("--model", default="base", show_default=True, help="Model name for the endpoint.")
@click.option("--formats", default="cap_fsu,reason", show_default=True)
@click.option("--concurrency", type=int, default=8, show_default=True)
@click.pass_obj
def distill(cfg: ToolkitConfig, annotations_file, out_dir, iterations, mock, endpoint,
            model, formats, concurrency):
    """Run the caption-distillation rounds and write one dataset per round."""
    if not mock and endpoint is None:
        _fail("either --mock or --endpoint is required", EX_USAGE)
    format_list = tuple(f.strip() for f in formats.split(",") if f.strip())
    annotations = _load_annotations(annotations_file, cfg)

    def client_for_round(round_index: int) -> distill_mod.ModelClient:
        # The caller retrains and redeploys between rounds; the endpoint and
        # model name stay fixed while the weights behind them change.
        if mock:
            return distill_mod.MockModelClient()
        return distill_mod.HttpModelClient(url=endpoint, model=model)

    try:
        state = distill_mod.run_distillation(
            annotations,
            client_for_round,
            iterations,
            out_dir,
            formats=format_list,
            max_in_flight=concurrency,
            registry=cfg.registry,
        )
    except (ValueError, distill_mod.IterationExhausted) as exc:
        _fail(str(exc))
        raise AssertionError("unreachable")
    for failure in state.failures:
        click.echo(f"failure {failure.image_ref}: {failure.reason}", err=True)
    click.echo(
        f"produced {len(state.dataset_paths)} datasets in {out_dir} "
        f"(last round wrote {state.records_count} records)",
        err=True,
    )


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=None, envvar="FSUKIT_PORT",
              help="Port (env FSUKIT_PORT, default 8000).")
@click.option("--batch-limit", type=int, default=None, help="Override the batch item limit.")
@click.option("--token", default=None, help="Require this bearer token on scoring routes.")
@click.pass_obj
def serve(cfg: ToolkitConfig, host: str, port: int | None, batch_limit: int | None, token: str | None):
    """Run the HTTP reward service."""
    import uvicorn
    from dataclasses import replace as dc_replace

    from .service import create_app

    if batch_limit is not None:
        cfg = dc_replace(cfg, batch_limit=batch_limit)
    if token is not None:
        cfg = dc_replace(cfg, token=token)
    uvicorn.run(create_app(cfg), host=host, port=port or 8000, log_level="warning")


if __name__ == "__main__":
    main()
