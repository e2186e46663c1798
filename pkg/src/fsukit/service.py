"""Stateless HTTP reward service.

Bodies are JSON arrays of the same records the CLI reads from JSONL files,
and scoring goes through the same code path, so service results are
bit-identical to batch results. Malformed bodies get a 400 with per-item
diagnostics; oversized batches get a 413; per-item scoring faults still
return 200 with a zeroed, diagnosed item.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .batch import eval_items, score_items, validate_eval_item, validate_score_item
from .config import ToolkitConfig, load_config
from .evaluation import report_to_dict


def _item_diagnostics(items: list, validator) -> list[dict]:
    diagnostics = []
    for index, item in enumerate(items):
        error = validator(item)
        if error is not None:
            diagnostics.append({"index": index, "error": error})
    return diagnostics


def create_app(config: Optional[ToolkitConfig] = None) -> FastAPI:
    cfg = config or load_config()
    app = FastAPI(title="fsukit reward service")

    def unauthorized(request: Request) -> Optional[JSONResponse]:
        if cfg.token is None:
            return None
        if request.headers.get("Authorization") == f"Bearer {cfg.token}":
            return None
        return JSONResponse({"error": "unauthorized"}, status_code=401)

    async def read_batch(request: Request, validator) -> tuple[Optional[list], Optional[JSONResponse]]:
        try:
            body = await request.json()
        except Exception:  # noqa: BLE001 - malformed JSON is a client error
            return None, JSONResponse(
                {"error": "body is not valid JSON", "diagnostics": []}, status_code=400
            )
        if not isinstance(body, list):
            return None, JSONResponse(
                {"error": "body must be a JSON array of items", "diagnostics": []},
                status_code=400,
            )
        if len(body) > cfg.batch_limit:
            return None, JSONResponse(
                {"error": f"batch of {len(body)} exceeds limit {cfg.batch_limit}"},
                status_code=413,
            )
        diagnostics = _item_diagnostics(body, validator)
        if diagnostics:
            return None, JSONResponse(
                {"error": "malformed items", "diagnostics": diagnostics}, status_code=400
            )
        return body, None

    @app.get("/healthz")
    async def healthz() -> PlainTextResponse:
        return PlainTextResponse("ok")

    @app.get("/v1/config")
    async def effective_config() -> dict:
        return {
            "sigma1": cfg.reward.sigma1,
            "sigma2": cfg.reward.sigma2,
            "sigma3": cfg.reward.sigma3,
            "weights": dict(cfg.eval.weights),
            "eps1": cfg.eval.eps1,
            "eps2": cfg.eval.eps2,
            "open_sim_threshold": cfg.eval.open_sim_threshold,
            "batch_limit": cfg.batch_limit,
            "lenient_format": cfg.lenient_format,
        }

    @app.post("/v1/reward")
    async def reward(request: Request):
        denied = unauthorized(request)
        if denied is not None:
            return denied
        items, error = await read_batch(request, validate_score_item)
        if error is not None:
            return error
        return JSONResponse(score_items(items, cfg))

    @app.post("/v1/eval")
    async def evaluate(request: Request):
        denied = unauthorized(request)
        if denied is not None:
            return denied
        items, error = await read_batch(request, validate_eval_item)
        if error is not None:
            return error
        try:
            report = eval_items(items, cfg)
        except ValueError as exc:
            return JSONResponse({"error": str(exc), "diagnostics": []}, status_code=400)
        return JSONResponse(report_to_dict(report))

    return app
