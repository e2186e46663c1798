"""Traffic-sign FSU data model: key registries, normalization, validation,
and the canonical dictionary text form.

A sign decomposition is a set of global attributes (Yes/No flags plus free
text) and one group of functional structure units (FSUs) per function type.
Entries carry an ordered key -> value map whose keys come from a per-function
registry. All types are immutable; every operation here is a pure function.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Iterator, Mapping, Optional, Sequence


class FunctionType(str, Enum):
    """The four functions a sign region can serve."""

    DIRECTION = "Direction"
    LANE = "Lane"
    NOTICE = "Notice"
    CONSTRUCTION = "Construction"

    def __str__(self) -> str:  # pragma: no cover - repr sugar
        return self.value


# Canonical top-level key order used by the serializer and the evaluator.
GLOBAL_BINARY_KEYS = ("Traffic Sign", "Electronic Sign", "Obstruction", "Truncation", "Blur")
OTHER_GLOBAL_KEY = "Other Global Information"
FUNCTION_TYPE_KEY = "Function Type"
COUNT_WEIGHT_KEY = "FSU Count"

YES = "Yes"
NO = "No"


def normalize_text(raw: str) -> str:
    """Normalize text for storage and comparison.

    NFKC folds full-width Latin/digits/punctuation to half-width; whitespace
    runs (including ideographic spaces, which NFKC maps to U+0020) collapse
    to single spaces and the ends are trimmed.
    """
    folded = unicodedata.normalize("NFKC", raw)
    return " ".join(folded.split())


@dataclass(frozen=True)
class AttrValue:
    """A scalar or ordered-list attribute value, normalized on construction."""

    kind: str  # "scalar" | "list"
    text: Optional[str] = None
    items: tuple[str, ...] = ()

    @staticmethod
    def scalar(raw: str) -> "AttrValue":
        return AttrValue(kind="scalar", text=normalize_text(raw))

    @staticmethod
    def list_of(raw_items: Sequence[str]) -> "AttrValue":
        return AttrValue(kind="list", items=tuple(normalize_text(i) for i in raw_items))

    @staticmethod
    def from_text(raw: str) -> "AttrValue":
        """Build from free text; "[a, b]" bracket syntax becomes a list."""
        text = normalize_text(raw)
        if text.startswith("[") and text.endswith("]"):
            inner = text[1:-1].strip()
            if not inner:
                return AttrValue(kind="list", items=())
            return AttrValue.list_of(inner.split(","))
        return AttrValue(kind="scalar", text=text)

    @property
    def is_list(self) -> bool:
        return self.kind == "list"

    def joined(self) -> str:
        """Comparison/leaf text: the scalar itself or comma-joined items."""
        if self.is_list:
            return ", ".join(self.items)
        return self.text or ""

    def canonical_text(self) -> str:
        """Serialized value text: lists keep their bracket syntax."""
        if self.is_list:
            return "[" + ", ".join(self.items) + "]"
        return self.text or ""


@dataclass(frozen=True)
class GlobalAttributes:
    """Top-level sign attributes. Binary flags are tri-state: Yes/No/absent
    (None). Absence is reported by validation, never coerced to "No".
    """

    traffic_sign: Optional[str] = None
    electronic_sign: Optional[str] = None
    obstruction: Optional[str] = None
    truncation: Optional[str] = None
    blur: Optional[str] = None
    other_global_info: Optional[str] = None

    _FIELD_BY_KEY = {
        "Traffic Sign": "traffic_sign",
        "Electronic Sign": "electronic_sign",
        "Obstruction": "obstruction",
        "Truncation": "truncation",
        "Blur": "blur",
    }

    def get(self, key: str) -> Optional[str]:
        if key == OTHER_GLOBAL_KEY:
            return self.other_global_info
        return getattr(self, self._FIELD_BY_KEY[key])

    def present_items(self) -> Iterator[tuple[str, str]]:
        """(key, value) pairs for present attributes, in canonical order."""
        for key in GLOBAL_BINARY_KEYS:
            value = self.get(key)
            if value is not None:
                yield key, value
        if self.other_global_info is not None:
            yield OTHER_GLOBAL_KEY, self.other_global_info


# Public view of the binary-global field mapping for interpreters/evaluators.
GLOBAL_FIELD_BY_KEY = GlobalAttributes._FIELD_BY_KEY


@dataclass(frozen=True, eq=False)
class FsuEntry:
    """One functional structure unit: an ordered key -> value map.

    Neither ``index`` (the ordinal carried by the source text) nor the attr
    insertion order is part of entry identity: serialization re-derives both
    canonically, so round-trips stay stable.
    """

    function: FunctionType
    attrs: tuple[tuple[str, AttrValue], ...] = ()
    index: int = field(default=0, compare=False)

    def get(self, key: str) -> Optional[AttrValue]:
        for k, v in self.attrs:
            if k == key:
                return v
        return None

    def keys(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.attrs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FsuEntry):
            return NotImplemented
        return self.function == other.function and dict(self.attrs) == dict(other.attrs)

    def __hash__(self) -> int:
        return hash((self.function, frozenset(self.attrs)))


@dataclass(frozen=True)
class FsuGroup:
    """All FSUs of one function, plus the count the sign text declared."""

    function: FunctionType
    declared_count: Optional[int] = None
    entries: tuple[FsuEntry, ...] = ()


@dataclass(frozen=True)
class SignDecomposition:
    """Global attributes plus the FSU groups of one sign."""

    globals: GlobalAttributes = GlobalAttributes()
    groups: tuple[FsuGroup, ...] = ()

    def functions(self) -> tuple[FunctionType, ...]:
        return tuple(g.function for g in self.groups)

    def function_type_text(self) -> Optional[str]:
        if not self.groups:
            return None
        return ", ".join(g.function.value for g in self.groups)

    def group_for(self, function: FunctionType) -> Optional[FsuGroup]:
        for g in self.groups:
            if g.function == function:
                return g
        return None

    def total_entries(self) -> int:
        return sum(len(g.entries) for g in self.groups)


@dataclass(frozen=True)
class Violation:
    """A single validation finding. Violations are data, never exceptions."""

    code: str
    path: str
    message: str


class KeyRegistry:
    """Allowed keys, enumerations, aliases, and translations for FSU text.

    Loaded from a JSON config document so deployments can extend the key
    sets without code changes. Alias and key lookups are case-insensitive
    over normalized text; the translation table is consulted first so
    Chinese-origin labels resolve to the canonical English keys.
    """

    def __init__(self, payload: Mapping) -> None:
        self.registries: dict[FunctionType, tuple[str, ...]] = {
            FunctionType(name): tuple(keys) for name, keys in payload["registries"].items()
        }
        self.enumerations: dict[FunctionType, dict[str, tuple[str, ...]]] = {
            FunctionType(name): {k: tuple(v) for k, v in per_key.items()}
            for name, per_key in payload.get("enumerations", {}).items()
        }
        self.translations: dict[str, str] = dict(payload.get("translations", {}))

        self._global_lookup: dict[str, str] = {}
        for key in GLOBAL_BINARY_KEYS + (OTHER_GLOBAL_KEY, FUNCTION_TYPE_KEY):
            self._global_lookup[key.casefold()] = key
        for alias, target in payload.get("global_aliases", {}).items():
            self._global_lookup[normalize_text(alias).casefold()] = target

        self._function_lookup: dict[str, FunctionType] = {
            f.value.casefold(): f for f in FunctionType
        }
        for alias, target in payload.get("function_aliases", {}).items():
            self._function_lookup[normalize_text(alias).casefold()] = FunctionType(target)

        self._key_lookup: dict[FunctionType, dict[str, str]] = {}
        key_aliases = payload.get("key_aliases", {})
        for function, keys in self.registries.items():
            lookup = {k.casefold(): k for k in keys}
            for alias, target in key_aliases.get(function.value, {}).items():
                lookup[normalize_text(alias).casefold()] = target
            self._key_lookup[function] = lookup

    @staticmethod
    def from_file(path: str) -> "KeyRegistry":
        with open(path, encoding="utf-8") as fh:
            return KeyRegistry(json.load(fh))

    def translate(self, key: str) -> str:
        return self.translations.get(key, key)

    def resolve_top_level(self, key: str) -> Optional[str]:
        """Canonical global/Function Type key for ``key``, or None."""
        return self._global_lookup.get(self.translate(normalize_text(key)).casefold())

    def resolve_function(self, text: str) -> Optional[FunctionType]:
        return self._function_lookup.get(self.translate(normalize_text(text)).casefold())

    def resolve_attr_key(self, function: FunctionType, key: str) -> str:
        """Canonical registry key when recognized, else the normalized key."""
        normalized = self.translate(normalize_text(key))
        return self._key_lookup[function].get(normalized.casefold(), normalized)

    def allowed_keys(self, function: FunctionType) -> tuple[str, ...]:
        return self.registries[function]

    def enumeration(self, function: FunctionType, key: str) -> Optional[tuple[str, ...]]:
        return self.enumerations.get(function, {}).get(key)

    def is_closed_set(self, function: FunctionType, key: str) -> bool:
        return self.enumeration(function, key) is not None


def _load_default_registry() -> KeyRegistry:
    data = resources.files("fsukit.data").joinpath("default_config.json").read_text("utf-8")
    return KeyRegistry(json.loads(data))


_DEFAULT_REGISTRY: Optional[KeyRegistry] = None


def default_registry() -> KeyRegistry:
    global _DEFAULT_REGISTRY
    if _DEFAULT_REGISTRY is None:
        _DEFAULT_REGISTRY = _load_default_registry()
    return _DEFAULT_REGISTRY


def validate(d: SignDecomposition, registry: Optional[KeyRegistry] = None) -> list[Violation]:
    """Check a decomposition against the schema rules.

    Returns a (possibly empty) list of violations: non-Yes/No binary globals,
    absent binary globals, keys outside the function registry, declared-count
    mismatches, closed-set values outside their enumeration, empty list
    values, and duplicate/misfiled groups. Total: never raises.
    """
    reg = registry or default_registry()
    out: list[Violation] = []

    for key in GLOBAL_BINARY_KEYS:
        value = d.globals.get(key)
        if value is None:
            out.append(Violation("MissingGlobal", key, f"global attribute {key!r} is absent"))
        elif value not in (YES, NO):
            out.append(
                Violation("BinaryNotYesNo", key, f"{key!r} must be Yes or No, got {value!r}")
            )

    seen_functions: set[FunctionType] = set()
    for gi, group in enumerate(d.groups):
        gname = f"{group.function.value} Information"
        if group.function in seen_functions:
            out.append(
                Violation("DuplicateGroup", gname, f"more than one {group.function.value} group")
            )
        seen_functions.add(group.function)

        if group.declared_count is not None:
            if group.declared_count < 0:
                out.append(
                    Violation(
                        "BadCount",
                        f"Number of {gname}",
                        f"declared count {group.declared_count} is negative",
                    )
                )
            elif group.declared_count != len(group.entries):
                out.append(
                    Violation(
                        "CountMismatch",
                        f"Number of {gname}",
                        f"declared {group.declared_count} but found {len(group.entries)} entries",
                    )
                )

        allowed = set(reg.allowed_keys(group.function))
        for ei, entry in enumerate(group.entries):
            path = f"{gname} {ei + 1}"
            if entry.function != group.function:
                out.append(
                    Violation(
                        "FunctionMismatch",
                        path,
                        f"entry function {entry.function.value} differs from group",
                    )
                )
            for key, value in entry.attrs:
                kpath = f"{path}.{key}"
                if key not in allowed:
                    out.append(
                        Violation(
                            "UnknownKey",
                            kpath,
                            f"{key!r} is not a {group.function.value} key",
                        )
                    )
                    continue
                if value.is_list and not value.items:
                    out.append(Violation("EmptyList", kpath, "list value has no items"))
                enum_values = reg.enumeration(group.function, key)
                if enum_values is not None:
                    if value.is_list or value.text not in enum_values:
                        out.append(
                            Violation(
                                "ClosedSetValue",
                                kpath,
                                f"{value.canonical_text()!r} not in the {key!r} enumeration",
                            )
                        )
    return out


def canonical_attr_order(
    entry: FsuEntry, registry: Optional[KeyRegistry] = None
) -> list[tuple[str, AttrValue]]:
    """Registry order for known keys, then unknown keys alphabetically."""
    reg = registry or default_registry()
    by_key = dict(entry.attrs)
    known = [k for k in reg.allowed_keys(entry.function) if k in by_key]
    unknown = sorted(k for k in by_key if k not in set(known))
    return [(k, by_key[k]) for k in known + unknown]


def canonical_serialize(d: SignDecomposition, registry: Optional[KeyRegistry] = None) -> str:
    """Emit the canonical dictionary text for a decomposition.

    The output is valid JSON with every value rendered as a string, keys in
    the fixed top-level order, entry numbering re-derived from position, and
    attribute keys in registry order - equal decompositions serialize to
    identical bytes.
    """
    reg = registry or default_registry()

    def js(text: str) -> str:
        return json.dumps(text, ensure_ascii=False)

    parts: list[str] = []
    for key, value in d.globals.present_items():
        parts.append(f"{js(key)}: {js(value)}")

    function_type = d.function_type_text()
    if function_type is not None:
        parts.append(f"{js(FUNCTION_TYPE_KEY)}: {js(function_type)}")

    for group in d.groups:
        gname = f"{group.function.value} Information"
        if group.declared_count is not None:
            parts.append(f"{js('Number of ' + gname)}: {js(str(group.declared_count))}")
        for pos, entry in enumerate(group.entries, start=1):
            attr_parts = [
                f"{js(k)}: {js(v.canonical_text())}"
                for k, v in canonical_attr_order(entry, reg)
            ]
            parts.append(f"{js(f'{gname} {pos}')}: {{{', '.join(attr_parts)}}}")

    return "{" + ", ".join(parts) + "}"
