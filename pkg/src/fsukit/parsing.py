"""Caption/FSU response parsing and the two binary format rewards.

Model output is expected as one caption block followed by one FSU block.
Extraction is forgiving (first block wins, unclosed FSU blocks read to the
end of text) while the format reward applies a strict grammar. The FSU
dictionary text is parsed raw first and then once more after a fixed
sequence of cleanup passes, so the parsability reward is reproducible.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Optional

from .schema import (
    FUNCTION_TYPE_KEY,
    GLOBAL_FIELD_BY_KEY,
    OTHER_GLOBAL_KEY,
    AttrValue,
    FsuEntry,
    FsuGroup,
    FunctionType,
    GlobalAttributes,
    KeyRegistry,
    SignDecomposition,
    default_registry,
    normalize_text,
)

CAPTION_OPEN = "<caption>"
CAPTION_CLOSE = "</caption>"
FSU_OPEN = "<FSU>"
FSU_CLOSE = "</FSU>"
TAG_LITERALS = (CAPTION_OPEN, CAPTION_CLOSE, FSU_OPEN, FSU_CLOSE)

# Strict shape: optional outer whitespace, exactly one caption block then one
# FSU block, tag literals nowhere inside block contents, nothing else. A
# missing closing FSU tag is tolerated (generation may stop at a length
# limit), but any trailing text after a closing tag is not.
_STRICT_FORMAT_RE = re.compile(
    r"\A\s*<caption>(?:(?!</?caption>|</?FSU>).)*</caption>"
    r"\s*<FSU>(?:(?!</?caption>|</?FSU>).)*(?:</FSU>\s*)?\Z",
    re.DOTALL,
)

_CAPTION_BLOCK_RE = re.compile(r"<caption>(.*?)(?:</caption>|\Z)", re.DOTALL)
_FSU_BLOCK_RE = re.compile(r"<FSU>(.*?)(?:</FSU>|\Z)", re.DOTALL)


@dataclass(frozen=True)
class ModelResponse:
    """Parse outcome for one raw model response."""

    raw: str
    caption: Optional[str]
    fsu_text: Optional[str]
    decomposition: Optional[SignDecomposition]
    format_ok: bool
    parse_ok: bool
    parse_diagnostics: tuple[str, ...]


def _lenient_format_ok(raw: str) -> bool:
    """Single caption block then single FSU block, prose outside allowed."""
    if any(raw.count(tag) > 1 for tag in TAG_LITERALS):
        return False
    positions = [raw.find(tag) for tag in TAG_LITERALS]
    pco, pcc, pfo, pfc = positions
    if pco < 0 or pcc < 0 or pfo < 0:
        return False
    if not pco < pcc < pfo:
        return False
    return pfc < 0 or pfo < pfc


def reward_caption_fsu_format(raw: str, *, lenient: bool = False) -> int:
    """1 when the response follows the caption-then-FSU layout, else 0."""
    if lenient:
        return int(_lenient_format_ok(raw))
    return int(_STRICT_FORMAT_RE.match(raw) is not None)


# --- tolerant dictionary parsing -------------------------------------------

_SMART_QUOTES = {
    "“": '"',  # left double
    "”": '"',  # right double
    "„": '"',
    "‟": '"',
    "″": '"',
    "‘": "'",  # left single
    "’": "'",  # right single
    "‚": "'",
    "‛": "'",
    "′": "'",
}

_WIDE_PUNCT = {
    "：": ":",  # ：
    "，": ",",  # ，
    "｛": "{",  # ｛
    "｝": "}",  # ｝
    "［": "[",  # ［
    "］": "]",  # ］
    "＂": '"',  # ＂
}

_CODE_FENCE_OPEN_RE = re.compile(r"\A```[^\n]*\n?")
_CODE_FENCE_CLOSE_RE = re.compile(r"\n?```\s*\Z")
_TRAILING_COMMA_RE = re.compile(r",\s*(?=[}\]])")
_BARE_KEY_RE = re.compile(r"([{,]\s*)([^\s\"'{}\[\],:][^:\"{}\[\],]*?)(\s*:)")


def _strip_code_fences(text: str) -> str:
    text = _CODE_FENCE_OPEN_RE.sub("", text.strip())
    return _CODE_FENCE_CLOSE_RE.sub("", text)


def _straighten_quotes(text: str) -> str:
    return text.translate(str.maketrans(_SMART_QUOTES))


def _fold_wide_punctuation(text: str) -> str:
    return text.translate(str.maketrans(_WIDE_PUNCT))


def _drop_trailing_commas(text: str) -> str:
    return _TRAILING_COMMA_RE.sub("", text)


def _quote_bare_keys(text: str) -> str:
    return _BARE_KEY_RE.sub(
        lambda m: m.group(1) + json.dumps(m.group(2).strip(), ensure_ascii=False) + m.group(3),
        text,
    )


# Applied in this exact order when the raw parse fails.
TOLERANCE_PASSES = (
    _strip_code_fences,
    _straighten_quotes,
    _fold_wide_punctuation,
    _drop_trailing_commas,
    _quote_bare_keys,
)


def tolerant_parse_object(text: str) -> Optional[dict]:
    """Parse dictionary text to a dict, retrying after the cleanup passes.

    Returns None when the text does not describe a key-value object even
    after cleanup.
    """
    candidate = text.strip()
    try:
        obj = json.loads(candidate)
        return obj if isinstance(obj, dict) else None
    except ValueError:
        pass
    for do_pass in TOLERANCE_PASSES:
        candidate = do_pass(candidate)
    try:
        obj = json.loads(candidate)
    except ValueError:
        return None
    return obj if isinstance(obj, dict) else None


# --- dict -> SignDecomposition interpretation -------------------------------

_COUNT_KEY_RE = re.compile(r"\Anumber of (.+?) information\Z", re.IGNORECASE)
_ENTRY_KEY_RE = re.compile(r"\A(.+?) information (\d+)\Z", re.IGNORECASE)


def _value_to_attr(value: object, diagnostics: list[str], path: str) -> AttrValue:
    if isinstance(value, str):
        return AttrValue.from_text(value)
    if isinstance(value, list):
        return AttrValue.list_of([_scalar_text(v) for v in value])
    if isinstance(value, dict):
        diagnostics.append(f"nested object flattened to text at {path}")
        return AttrValue.scalar(json.dumps(value, ensure_ascii=False))
    return AttrValue.scalar(_scalar_text(value))


def _scalar_text(value: object) -> str:
    if isinstance(value, str):
        return value
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return json.dumps(value)


def _parse_count(value: object) -> Optional[int]:
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        text = normalize_text(value)
        if re.fullmatch(r"-?\d+", text):
            return int(text)
    return None


class _GroupAccumulator:
    def __init__(self, function: FunctionType) -> None:
        self.function = function
        self.declared_count: Optional[int] = None
        self.entries: list[FsuEntry] = []


def interpret_object(
    obj: dict, registry: Optional[KeyRegistry] = None
) -> tuple[SignDecomposition, list[str]]:
    """Map a parsed key-value object onto the decomposition model.

    Total: every dict yields a decomposition. Anything that cannot be
    represented (unknown top-level keys, malformed entries, unknown function
    names) is reported in the diagnostics list and skipped.
    """
    reg = registry or default_registry()
    diagnostics: list[str] = []
    global_values: dict[str, str] = {}
    declared_functions: list[FunctionType] = []
    groups: dict[FunctionType, _GroupAccumulator] = {}
    group_order: list[FunctionType] = []

    def group_for(function: FunctionType) -> _GroupAccumulator:
        if function not in groups:
            groups[function] = _GroupAccumulator(function)
            group_order.append(function)
        return groups[function]

    for raw_key, raw_value in obj.items():
        key = reg.translate(normalize_text(str(raw_key)))
        canonical = reg.resolve_top_level(key)

        if canonical in GLOBAL_FIELD_BY_KEY or canonical == OTHER_GLOBAL_KEY:
            attr = _value_to_attr(raw_value, diagnostics, canonical)
            global_values[canonical] = attr.joined()
            continue

        if canonical == FUNCTION_TYPE_KEY:
            text = _scalar_text(raw_value) if not isinstance(raw_value, list) else ", ".join(
                _scalar_text(v) for v in raw_value
            )
            for token in normalize_text(text).split(","):
                token = token.strip()
                if not token:
                    continue
                function = reg.resolve_function(token)
                if function is None:
                    diagnostics.append(f"unknown function {token!r} in Function Type")
                    continue
                declared_functions.append(function)
                group_for(function)
            continue

        count_match = _COUNT_KEY_RE.match(key)
        if count_match:
            function = reg.resolve_function(count_match.group(1))
            if function is None:
                diagnostics.append(f"unknown function in count key {key!r}")
                continue
            count = _parse_count(raw_value)
            if count is None or count < 0:
                diagnostics.append(f"non-numeric count for {key!r}: {raw_value!r}")
                continue
            group_for(function).declared_count = count
            continue

        entry_match = _ENTRY_KEY_RE.match(key)
        if entry_match:
            function = reg.resolve_function(entry_match.group(1))
            if function is None:
                diagnostics.append(f"unknown function in entry key {key!r}")
                continue
            if not isinstance(raw_value, dict):
                diagnostics.append(f"entry {key!r} is not a key-value object")
                group_for(function)
                continue
            index = int(entry_match.group(2))
            attrs: list[tuple[str, AttrValue]] = []
            for attr_key, attr_value in raw_value.items():
                canon_key = reg.resolve_attr_key(function, str(attr_key))
                attrs.append(
                    (canon_key, _value_to_attr(attr_value, diagnostics, f"{key}.{canon_key}"))
                )
            acc = group_for(function)
            if any(e.index == index for e in acc.entries):
                diagnostics.append(f"duplicate entry index in {key!r}")
            acc.entries.append(FsuEntry(function=function, attrs=tuple(attrs), index=index))
            continue

        diagnostics.append(f"unknown top-level key {raw_key!r}")

    if declared_functions and set(declared_functions) != set(group_order):
        diagnostics.append("Function Type does not match the groups present")
    if not group_order:
        diagnostics.append("MissingFunctionType: no function groups found")

    built_groups = []
    for function in group_order:
        acc = groups[function]
        entries = tuple(sorted(acc.entries, key=lambda e: e.index))
        built_groups.append(
            FsuGroup(function=function, declared_count=acc.declared_count, entries=entries)
        )

    globals_ = GlobalAttributes(
        other_global_info=global_values.get(OTHER_GLOBAL_KEY),
        **{field: global_values.get(k) for k, field in GLOBAL_FIELD_BY_KEY.items()},
    )
    return SignDecomposition(globals=globals_, groups=tuple(built_groups)), diagnostics


def parse_response(
    raw: str,
    *,
    lenient_format: bool = False,
    registry: Optional[KeyRegistry] = None,
) -> ModelResponse:
    """Extract the caption and FSU segments from raw model output.

    Never raises: every failure surfaces as flags plus diagnostics. The
    format flag and the parse flag are independent - a bare FSU block can
    parse with format_ok False.
    """
    caption_match = _CAPTION_BLOCK_RE.search(raw)
    caption = caption_match.group(1) if caption_match else None
    fsu_match = _FSU_BLOCK_RE.search(raw)
    fsu_text = fsu_match.group(1) if fsu_match else None

    format_ok = bool(reward_caption_fsu_format(raw, lenient=lenient_format))

    decomposition: Optional[SignDecomposition] = None
    diagnostics: list[str] = []
    parse_ok = False
    if fsu_text is None:
        diagnostics.append("no FSU block found")
    else:
        obj = tolerant_parse_object(fsu_text)
        if obj is None:
            diagnostics.append("FSU text is not a parsable dictionary")
        else:
            parse_ok = True
            decomposition, diagnostics = interpret_object(obj, registry)

    return ModelResponse(
        raw=raw,
        caption=caption,
        fsu_text=fsu_text,
        decomposition=decomposition,
        format_ok=format_ok,
        parse_ok=parse_ok,
        parse_diagnostics=tuple(diagnostics),
    )


def reward_fsu_parsable(raw: str) -> int:
    """1 when an FSU block exists and its text parses to a key-value object."""
    fsu_match = _FSU_BLOCK_RE.search(raw)
    if fsu_match is None:
        return 0
    return int(tolerant_parse_object(fsu_match.group(1)) is not None)


def extract_decomposition(
    raw: str, registry: Optional[KeyRegistry] = None
) -> Optional[SignDecomposition]:
    """Decomposition from a response with blocks, or from bare dictionary text."""
    response = parse_response(raw, registry=registry)
    if response.decomposition is not None:
        return response.decomposition
    obj = tolerant_parse_object(raw)
    if obj is None:
        return None
    decomposition, _ = interpret_object(obj, registry)
    return decomposition
