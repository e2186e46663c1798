"""Toolkit configuration: defaults shipped as package data, optionally
overlaid by a user config file and command-line overrides."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Optional

from .evaluation import EvalConfig
from .rewards import RewardConfig
from .schema import KeyRegistry


@dataclass(frozen=True)
class ToolkitConfig:
    registry: KeyRegistry
    reward: RewardConfig
    eval: EvalConfig
    batch_limit: int = 1024
    lenient_format: bool = False
    token: Optional[str] = None


def _deep_merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _default_payload() -> dict:
    data = resources.files("fsukit.data").joinpath("default_config.json").read_text("utf-8")
    return json.loads(data)


def load_config(
    path: Optional[str] = None,
    *,
    preset: str = "supp",
    sigma1: Optional[float] = None,
    sigma2: Optional[float] = None,
    sigma3: Optional[float] = None,
) -> ToolkitConfig:
    """Build the effective configuration.

    Precedence: packaged defaults < config file < explicit overrides.
    """
    payload = _default_payload()
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            payload = _deep_merge(payload, json.load(fh))

    reward_section = payload.get("reward", {})
    reward = RewardConfig(
        sigma1=sigma1 if sigma1 is not None else reward_section.get("sigma1", 0.5),
        sigma2=sigma2 if sigma2 is not None else reward_section.get("sigma2", 5.0),
        sigma3=sigma3 if sigma3 is not None else reward_section.get("sigma3", 0.5),
    )

    eval_section = payload.get("eval", {})
    eval_kwargs = {
        "weights": eval_section.get("weights"),
        "eps1": eval_section.get("eps1"),
        "eps2": eval_section.get("eps2"),
        "open_sim_threshold": eval_section.get("open_sim_threshold"),
        "strict_open_sim_threshold": eval_section.get("strict_open_sim_threshold"),
    }
    eval_kwargs = {k: v for k, v in eval_kwargs.items() if v is not None}
    eval_cfg = EvalConfig.preset(preset, **eval_kwargs)

    serve_section = payload.get("serve", {})
    return ToolkitConfig(
        registry=KeyRegistry(payload),
        reward=reward,
        eval=eval_cfg,
        batch_limit=int(serve_section.get("batch_limit", 1024)),
        lenient_format=bool(payload.get("lenient_format", False)),
        token=serve_section.get("token"),
    )
