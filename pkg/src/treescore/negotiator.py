"""Per-instruction edge-weight negotiation.

A judge is asked, once per weighted family, to distribute weights over the
family's leaf dimensions subject to two constraints: each weight lies in
the open interval (-1, 1) and the weights sum to 1.  Responses that miss
the sum by at most RENORM_WINDOW are rescaled and flagged; after the retry
budget is exhausted the family falls back to uniform weights so batch runs
stay total.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .data import WritingTask
from .errors import (
    JudgeError,
    MissingDimensionError,
    NonNumericWeightError,
    WeightError,
)
from .judge import JudgeClient, JudgeRequest
from .prompts import DIMENSION_LABELS, PromptLibrary
from .tree import Family, WeightVector, WEIGHT_SUM_TOLERANCE

RENORM_WINDOW = 0.05
DEFAULT_RETRIES = 2


class WeightSource(str, Enum):
    NEGOTIATED = "Negotiated"
    RENORMALIZED = "Renormalized"
    UNIFORM_FALLBACK = "UniformFallback"


def build_weight_prompt(
    instruction: str, family: Family, prompts: PromptLibrary | None = None
) -> str:
    """Render the weighting prompt for one family around the instruction."""
    return (prompts or PromptLibrary()).render_weighting(family, instruction)


_NUMBER = re.compile(r"[-+]?\d+(?:\.\d+)?")


def parse_weights(response: str, leaf_labels: list[str]) -> list[float]:
    """Pull one decimal per labelled dimension out of a judge response.

    Looks for each label in order and takes the first number within a short
    window after it, so prose like "Formatting: 0.2 because ..." parses.
    """
    if not leaf_labels:
        raise WeightError("leaf label list must be non-empty")
    weights = []
    for label in leaf_labels:
        position = response.find(label)
        if position < 0:
            raise MissingDimensionError(f"response does not mention {label!r}")
        window = response[position + len(label) : position + len(label) + 40]
        match = _NUMBER.search(window)
        if match is None:
            raise NonNumericWeightError(
                f"no numeric weight after {label!r}: {window.strip()[:40]!r}"
            )
        weights.append(float(match.group(0)))
    return weights


def validate_weights(raw: list[float]) -> tuple[WeightVector, WeightSource]:
    """Accept an exact unit-sum vector, renormalize a near miss, else reject."""
    if not raw:
        raise WeightError("weight list must be non-empty")
    for w in raw:
        if not (-1.0 < w < 1.0):
            raise WeightError(f"weight {w} outside the open interval (-1, 1)")
    total = sum(raw)
    if abs(total - 1.0) <= WEIGHT_SUM_TOLERANCE:
        return WeightVector(tuple(raw)), WeightSource.NEGOTIATED
    if abs(total - 1.0) <= RENORM_WINDOW:
        rescaled = [w / total for w in raw]
        for w in rescaled:
            if not (-1.0 < w < 1.0):
                raise WeightError(
                    f"renormalization by {total} pushes a weight to {w}, "
                    "outside (-1, 1)"
                )
        return WeightVector(tuple(rescaled)), WeightSource.RENORMALIZED
    raise WeightError(f"weights sum to {total}, beyond the {RENORM_WINDOW} window")


_SOURCE_RANK = {
    WeightSource.NEGOTIATED: 0,
    WeightSource.RENORMALIZED: 1,
    WeightSource.UNIFORM_FALLBACK: 2,
}


@dataclass(frozen=True)
class WeightPlan:
    """Negotiated weights for one task, one vector per weighted family."""

    task_id: str
    content_weights: WeightVector
    content_source: WeightSource
    format_weights: WeightVector | None = None
    format_source: WeightSource | None = None
    rationale: str = ""
    raw_response: str = ""

    @property
    def source(self) -> WeightSource:
        """Most degraded source across the plan's families."""
        candidates = [self.content_source]
        if self.format_source is not None:
            candidates.append(self.format_source)
        return max(candidates, key=_SOURCE_RANK.__getitem__)

    def weights_for(self, family: Family) -> WeightVector | None:
        if family is Family.CONTENT:
            return self.content_weights
        if family is Family.FORMAT:
            return self.format_weights
        return None

    def sources(self) -> dict[Family, str]:
        out = {Family.CONTENT: self.content_source.value}
        if self.format_source is not None:
            out[Family.FORMAT] = self.format_source.value
        return out

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "content_weights": list(self.content_weights),
            "content_source": self.content_source.value,
            "format_weights": (
                list(self.format_weights) if self.format_weights else None
            ),
            "format_source": (
                self.format_source.value if self.format_source else None
            ),
            "rationale": self.rationale,
            "raw_response": self.raw_response,
        }


def negotiate_family(
    task: WritingTask,
    family: Family,
    judge: JudgeClient,
    model_id: str,
    retries: int = DEFAULT_RETRIES,
    temperature: float = 0.0,
    prompts: PromptLibrary | None = None,
) -> tuple[WeightVector, WeightSource, str, list[str]]:
    """One family's negotiation: query, parse, validate, retry, fall back.

    Returns (vector, source, rationale, raw transcripts).  Judge transport
    failures propagate; only parse/validation failures consume retries.
    """
    labels = [label for _, label in DIMENSION_LABELS[family]]
    prompt = build_weight_prompt(task.instruction, family, prompts)
    transcripts: list[str] = []
    for attempt in range(retries + 1):
        response = judge.complete(
            JudgeRequest(
                model_id=model_id,
                prompt=prompt,
                temperature=temperature,
                trial_index=attempt,
            )
        )
        transcripts.append(response.text)
        try:
            raw = parse_weights(response.text, labels)
            vector, source = validate_weights(raw)
        except WeightError:
            continue
        return vector, source, response.text, transcripts
    uniform = WeightVector.uniform(len(labels))
    return uniform, WeightSource.UNIFORM_FALLBACK, "", transcripts


def negotiate(
    task: WritingTask,
    judge: JudgeClient,
    retries: int = DEFAULT_RETRIES,
    *,
    model_id: str,
    families: tuple[Family, ...] = (Family.CONTENT, Family.FORMAT),
    temperature: float = 0.0,
    prompts: PromptLibrary | None = None,
) -> WeightPlan:
    """Negotiate one task's weight plan over the given weighted families.

    A family outside `families` (an ablated tree) gets an unqueried uniform
    placeholder so the plan type stays uniform across configurations.
    """
    prompts = prompts or PromptLibrary()

    if Family.CONTENT in families:
        content = negotiate_family(
            task, Family.CONTENT, judge, model_id, retries, temperature, prompts
        )
    else:
        content = (
            WeightVector.uniform(len(DIMENSION_LABELS[Family.CONTENT])),
            WeightSource.UNIFORM_FALLBACK,
            "",
            [],
        )
    format_result = None
    if Family.FORMAT in families:
        format_result = negotiate_family(
            task, Family.FORMAT, judge, model_id, retries, temperature, prompts
        )

    transcripts = list(content[3]) + (list(format_result[3]) if format_result else [])
    rationales = [content[2]]
    if format_result:
        rationales.append(format_result[2])
    return WeightPlan(
        task_id=task.id,
        content_weights=content[0],
        content_source=content[1],
        format_weights=format_result[0] if format_result else None,
        format_source=format_result[1] if format_result else None,
        rationale="\n---\n".join(r for r in rationales if r),
        raw_response="\n---\n".join(transcripts),
    )


@dataclass(frozen=True)
class UniformWeightPlan:
    """Fixed uniform weights; the negotiation-free configuration."""

    task_id: str = ""

    def weights_for(self, family: Family) -> WeightVector | None:
        labels = DIMENSION_LABELS.get(family)
        if labels is None:
            return None
        return WeightVector.uniform(len(labels))

    def sources(self) -> dict[Family, str]:
        return {
            Family.CONTENT: WeightSource.UNIFORM_FALLBACK.value,
            Family.FORMAT: WeightSource.UNIFORM_FALLBACK.value,
        }
