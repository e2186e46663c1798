"""Caption harvesting and SFT dataset assembly for the distillation loop.

Each round asks the current model for a caption per annotated image, splices
the caption and the canonical decomposition text into the caption-then-FSU
target layout, and writes one JSONL dataset per round. Fine-tuning happens
outside this package: the caller brings the next round's model endpoint.
"""

from __future__ import annotations

import json
import os
import re
import time
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import requests

from .parsing import CAPTION_CLOSE, CAPTION_OPEN, FSU_CLOSE, FSU_OPEN, TAG_LITERALS
from .schema import KeyRegistry, SignDecomposition, canonical_serialize

MODEL_TOKEN_ENV = "FSUKIT_MODEL_TOKEN"

CAPTION_PROMPT_TEXT = (
    "Please analyze this cropped traffic sign image in detail and generate a "
    "detailed caption describing the colors, shapes, and patterns of the signs, "
    "and explain their meanings. This part of the answer should be placed "
    "between the <caption> </caption> tags."
)

REASON_PROMPT_TEXT = (
    "Please provide the information on the traffic sign in a structured format "
    "as follows:\n"
    "1. Provide the global attribute information of the traffic sign. The "
    "output key values include {Traffic Sign, Electronic Sign, Obstruction, "
    "Blur, Truncation}, with answers chosen from {Yes, No}. Provide the {Other "
    "Global Information} of the traffic sign, with answers selected from the "
    "traffic sign itself.\n"
    "2. Provide the functional category of the traffic sign. The answer should "
    "be chosen from {Lane, Direction, Notice, Construction}.\n"
    "3. Provide the number of functional information items on the sign (for "
    "lane information, this refers to the number of lanes).\n"
    "4. List detailed explanations for each functional information item. For "
    "lane information, the output key values include {Electronic Sign, Turn, "
    "Location, Special Lane, Time, Date, Speed, Weight, Height, Other "
    "Information}. For direction information, the output key values include "
    "{Direction, Route, Destination, Traffic Status, Distance, Other "
    "Information}. For construction information, the output key values include "
    "{Construction Site, Detour Information, Other Information}. For notice "
    "information, the output key values include {Direction, License Plate, "
    "Vehicle Type, Time, Date, Road Range, Speed, Weight, Height, Other "
    "Information}. Only provide answers based on the text and symbols on the "
    "traffic sign, without adding any extra explanatory text. Place the "
    "structured response within the <FSU> </FSU> tags."
)

CAP_FSU_PROMPT_TEXT = (
    "Please provide the information on the traffic sign in a structured format "
    "as follows:\n"
    "1. Please analyze this cropped image of the traffic sign in detail and "
    "generate a detailed caption describing the colors, shapes, and patterns "
    "of the signs, and explain their meanings. This part of the answer should "
    "be placed between the <caption> </caption> tags.\n"
    "2. Based on the caption description, provide the global attribute "
    "information of the traffic sign. The output key values include {Traffic "
    "Sign, Electronic Sign, Obstruction, Blur, Truncation}, with answers "
    "chosen from {Yes, No}. Also, provide the {Other Global Information} of "
    "the traffic sign, with the answer selected from the traffic sign "
    "options.\n"
    "3. Based on the caption description, determine the functional category of "
    "the traffic sign. The answer should be chosen from {Lane, Direction, "
    "Notice, Construction}.\n"
    "4. Based on the caption description, indicate the number of functional "
    "information items on the sign (for lane information, this refers to the "
    "number of lanes).\n"
    "5. Based on the caption description, list detailed explanations for each "
    "functional information item. For lane information, the output key values "
    "include {Electronic Sign, Turn, Location, Special Lane, Time, Date, "
    "Speed, Weight, Height, Other Information}. For direction information, the "
    "output key values include {Direction, Route, Destination, Traffic Status, "
    "Distance, Other Information}. For construction information, the output "
    "key values include {Construction Site, Detour Information, Other "
    "Information}. For notice information, the output key values include "
    "{Direction, License Plate, Vehicle Type, Time, Date, Road Range, Speed, "
    "Weight, Height, Other Information}. Only provide the corresponding "
    "answers based on the text and symbols on the traffic sign, without adding "
    "any extra explanatory text. The structured answers for sections 2-5 "
    "should be placed between the <FSU> </FSU> tags."
)


@dataclass(frozen=True)
class PromptTemplate:
    kind: str  # "caption" | "reason" | "cap_fsu"
    text: str


PROMPTS: Mapping[str, PromptTemplate] = {
    "caption": PromptTemplate(kind="caption", text=CAPTION_PROMPT_TEXT),
    "reason": PromptTemplate(kind="reason", text=REASON_PROMPT_TEXT),
    "cap_fsu": PromptTemplate(kind="cap_fsu", text=CAP_FSU_PROMPT_TEXT),
}

DEFAULT_FORMATS = ("cap_fsu", "reason")


@dataclass(frozen=True)
class Annotation:
    image_ref: str
    gt: SignDecomposition


@dataclass(frozen=True)
class CaptionResult:
    image_ref: str
    caption: Optional[str]
    ok: bool
    reason: Optional[str] = None


@dataclass(frozen=True)
class SftRecord:
    image_ref: str
    prompt_kind: str
    prompt: str
    target: str


@dataclass(frozen=True)
class Failure:
    image_ref: str
    reason: str


@dataclass(frozen=True)
class DistillationState:
    """Bookkeeping across rounds; callers thread it between iterations."""

    iteration: int = 0
    max_iterations: int = 2
    dataset_paths: tuple[str, ...] = ()
    endpoints: tuple[str, ...] = ()
    records_count: int = 0
    failures: tuple[Failure, ...] = ()


class ClientError(Exception):
    """A model client could not produce a reply."""


class IterationExhausted(Exception):
    """run_iteration called past the final round."""


class ModelClient(ABC):
    """Black-box text generator; replies are treated as nondeterministic."""

    @abstractmethod
    def generate(self, image_ref: str, prompt_text: str) -> str:
        raise NotImplementedError

    @abstractmethod
    def describe(self) -> str:
        """Endpoint descriptor recorded in the iteration state."""
        raise NotImplementedError


class MockModelClient(ModelClient):
    """Deterministic canned captions for tests and CI runs."""

    def generate(self, image_ref: str, prompt_text: str) -> str:
        return (
            f"<caption>A clearly visible traffic sign for {image_ref}: blue "
            "background, white symbols and legible text.</caption>"
        )

    def describe(self) -> str:
        return "mock"


class TranscriptClient(ModelClient):
    """Replays a recorded image -> reply transcript byte-for-byte."""

    def __init__(self, transcript: Mapping[str, str], name: str = "transcript") -> None:
        self._transcript = dict(transcript)
        self._name = name

    def generate(self, image_ref: str, prompt_text: str) -> str:
        if image_ref not in self._transcript:
            raise ClientError(f"no recorded reply for {image_ref!r}")
        return self._transcript[image_ref]

    def describe(self) -> str:
        return self._name


class HttpModelClient(ModelClient):
    """Chat-completion style HTTP client with bounded retries.

    Posts {model, messages:[{role, content:[text, image]}]} to the endpoint
    and reads choices[0].message.content (falling back to a top-level
    "text" field). The bearer token comes from FSUKIT_MODEL_TOKEN.
    """

    def __init__(
        self,
        url: str,
        model: str,
        timeout: float = 60.0,
        retries: int = 2,
        backoff: float = 0.5,
        session: Optional[requests.Session] = None,
    ) -> None:
        self.url = url
        self.model = model
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._session = session or requests.Session()

    def describe(self) -> str:
        return f"{self.url}#{self.model}"

    def generate(self, image_ref: str, prompt_text: str) -> str:
        payload = {
            "model": self.model,
            "messages": [
                {
                    "role": "user",
                    "content": [
                        {"type": "text", "text": prompt_text},
                        {"type": "image_url", "image_url": {"url": image_ref}},
                    ],
                }
            ],
        }
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(MODEL_TOKEN_ENV)
        if token:
            headers["Authorization"] = f"Bearer {token}"

        last_error: Optional[Exception] = None
        for attempt in range(self.retries + 1):
            try:
                response = self._session.post(
                    self.url, json=payload, headers=headers, timeout=self.timeout
                )
                response.raise_for_status()
                body = response.json()
                if "choices" in body:
                    return body["choices"][0]["message"]["content"]
                if "text" in body:
                    return body["text"]
                raise ClientError(f"unrecognized reply shape: {sorted(body)}")
            except ClientError:
                raise
            except Exception as exc:  # noqa: BLE001 - network faults become retries
                last_error = exc
                if attempt < self.retries:
                    time.sleep(self.backoff * (2**attempt))
        raise ClientError(f"request failed after {self.retries + 1} attempts: {last_error}")


_CAPTION_INNER_RE = re.compile(r"<caption>(.*?)(?:</caption>|\Z)", re.DOTALL)


def extract_caption_text(reply: str) -> str:
    """Inner caption text when the model wraps it, else the raw reply."""
    match = _CAPTION_INNER_RE.search(reply)
    return match.group(1) if match else reply


def harvest_captions(
    annotations: Sequence[Annotation],
    client: ModelClient,
    *,
    max_in_flight: int = 8,
    prompt: PromptTemplate = PROMPTS["caption"],
) -> list[CaptionResult]:
    """One caption per image, in input order; failures recorded, never fatal."""
    if not annotations:
        return []

    def fetch(annotation: Annotation) -> CaptionResult:
        try:
            reply = client.generate(annotation.image_ref, prompt.text)
        except Exception as exc:  # noqa: BLE001 - per-item failures are data
            return CaptionResult(
                image_ref=annotation.image_ref, caption=None, ok=False, reason=str(exc)
            )
        return CaptionResult(
            image_ref=annotation.image_ref, caption=extract_caption_text(reply), ok=True
        )

    with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
        return list(pool.map(fetch, annotations))


def _has_tag_collision(caption: str) -> bool:
    return any(tag in caption for tag in TAG_LITERALS)


def assemble_sft(
    captions: Sequence[CaptionResult],
    annotations: Sequence[Annotation],
    *,
    formats: Sequence[str] = DEFAULT_FORMATS,
    registry: Optional[KeyRegistry] = None,
) -> tuple[list[SftRecord], list[Failure]]:
    """Join captions to annotations and build the training targets.

    Emits one record per requested format per annotation, ordered by
    (image_ref, format). A missing or tag-colliding caption skips only the
    caption-bearing record and is reported as a failure.
    """
    unknown = [f for f in formats if f not in ("cap_fsu", "reason")]
    if unknown:
        raise ValueError(f"unknown formats: {unknown}")

    caption_by_image = {c.image_ref: c for c in captions if c.ok and c.caption is not None}
    records: list[SftRecord] = []
    failures: list[Failure] = []
    for annotation in sorted(annotations, key=lambda a: a.image_ref):
        fsu_text = canonical_serialize(annotation.gt, registry)
        for kind in sorted(formats):
            if kind == "reason":
                records.append(
                    SftRecord(
                        image_ref=annotation.image_ref,
                        prompt_kind="reason",
                        prompt=PROMPTS["reason"].text,
                        target=f"{FSU_OPEN}{fsu_text}{FSU_CLOSE}",
                    )
                )
                continue
            caption = caption_by_image.get(annotation.image_ref)
            if caption is None:
                failures.append(Failure(annotation.image_ref, "MissingCaption"))
                continue
            if _has_tag_collision(caption.caption or ""):
                failures.append(Failure(annotation.image_ref, "TagCollision"))
                continue
            records.append(
                SftRecord(
                    image_ref=annotation.image_ref,
                    prompt_kind="cap_fsu",
                    prompt=PROMPTS["cap_fsu"].text,
                    target=(
                        f"{CAPTION_OPEN}{caption.caption}{CAPTION_CLOSE}"
                        f"{FSU_OPEN}{fsu_text}{FSU_CLOSE}"
                    ),
                )
            )
    return records, failures


def write_sft_jsonl(records: Sequence[SftRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(
                json.dumps(
                    {
                        "image": record.image_ref,
                        "prompt_kind": record.prompt_kind,
                        "prompt": record.prompt,
                        "target": record.target,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_sft_jsonl(path: str | Path) -> list[SftRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            records.append(
                SftRecord(
                    image_ref=row["image"],
                    prompt_kind=row["prompt_kind"],
                    prompt=row["prompt"],
                    target=row["target"],
                )
            )
    return records


def run_iteration(
    state: DistillationState,
    annotations: Sequence[Annotation],
    client: ModelClient,
    out_dir: str | Path,
    *,
    formats: Sequence[str] = DEFAULT_FORMATS,
    max_in_flight: int = 8,
    registry: Optional[KeyRegistry] = None,
) -> DistillationState:
    """Harvest, assemble, and write the dataset for the current round.

    The loop is inclusive of the final round index, so max_iterations=2
    yields datasets for rounds 0, 1 and 2. Raises IterationExhausted past
    the end.
    """
    if state.iteration > state.max_iterations:
        raise IterationExhausted(
            f"iteration {state.iteration} exceeds max {state.max_iterations}"
        )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    captions = harvest_captions(annotations, client, max_in_flight=max_in_flight)
    harvest_failures = [
        Failure(c.image_ref, c.reason or "ClientError") for c in captions if not c.ok
    ]
    records, assemble_failures = assemble_sft(
        captions, annotations, formats=formats, registry=registry
    )
    dataset_path = out / f"sft_iter{state.iteration}.jsonl"
    write_sft_jsonl(records, dataset_path)

    return replace(
        state,
        iteration=state.iteration + 1,
        dataset_paths=state.dataset_paths + (str(dataset_path),),
        endpoints=state.endpoints + (client.describe(),),
        records_count=len(records),
        failures=state.failures + tuple(harvest_failures + assemble_failures),
    )


def run_distillation(
    annotations: Sequence[Annotation],
    client_for_round: Callable[[int], ModelClient],
    max_iterations: int,
    out_dir: str | Path,
    *,
    formats: Sequence[str] = DEFAULT_FORMATS,
    max_in_flight: int = 8,
    registry: Optional[KeyRegistry] = None,
) -> DistillationState:
    """Run every round, pulling each round's model client from the caller."""
    state = DistillationState(iteration=0, max_iterations=max_iterations)
    while state.iteration <= state.max_iterations:
        state = run_iteration(
            state,
            annotations,
            client_for_round(state.iteration),
            out_dir,
            formats=formats,
            max_in_flight=max_in_flight,
            registry=registry,
        )
    return state
