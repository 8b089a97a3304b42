"""Reference-overlap metrics and single-prompt judge baselines.

Overlap metrics tokenize at the character level (whitespace dropped),
matching how the benchmark measures text length.  BLEU here is the
unigram variant: clipped character precision times a brevity penalty.
ROUGE-L is the character-level LCS F1.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

from .data import WritingTask
from .errors import ExtractionError, TreescoreError
from .experts import extract_bracket_score
from .judge import JudgeClient, JudgeRequest
from .prompts import PromptLibrary


class OverlapMetric(str, Enum):
    BLEU1 = "bleu1"
    ROUGE_L = "rouge_l"


@dataclass(frozen=True)
class OverlapScore:
    metric: OverlapMetric
    value: float
    components: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "metric": self.metric.value,
            "value": self.value,
            "components": dict(self.components),
        }


def _chars(text: str) -> list[str]:
    return [ch for ch in text if not ch.isspace()]


def bleu1(candidate: str, reference: str) -> OverlapScore:
    """Clipped character-unigram precision times brevity penalty."""
    cand = _chars(candidate)
    ref = _chars(reference)
    if not cand or not ref:
        raise TreescoreError("bleu1 requires non-empty texts after tokenization")
    cand_counts = Counter(cand)
    ref_counts = Counter(ref)
    clipped = sum(min(count, ref_counts[ch]) for ch, count in cand_counts.items())
    precision = clipped / len(cand)
    brevity = math.exp(min(0.0, 1.0 - len(ref) / len(cand)))
    return OverlapScore(
        metric=OverlapMetric.BLEU1,
        value=precision * brevity,
        components={
            "precision": precision,
            "brevity_penalty": brevity,
            "candidate_len": len(cand),
            "reference_len": len(ref),
        },
    )


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def rouge_l(candidate: str, reference: str) -> OverlapScore:
    """Character-level LCS F1 (beta = 1)."""
    cand = _chars(candidate)
    ref = _chars(reference)
    if not cand or not ref:
        raise TreescoreError("rouge_l requires non-empty texts after tokenization")
    lcs = _lcs_length(cand, ref)
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    value = 0.0 if lcs == 0 else 2 * precision * recall / (precision + recall)
    return OverlapScore(
        metric=OverlapMetric.ROUGE_L,
        value=value,
        components={"precision": precision, "recall": recall, "lcs": lcs},
    )


@dataclass(frozen=True)
class RubricResult:
    """Per-trial rubric scores with the spread the reports need."""

    mean: float
    worst: int
    best: int
    trials: tuple[int, ...]
    transcript_ids: tuple[str, ...] = ()


def run_rubric_baseline(
    task: WritingTask,
    writing: str,
    judge: JudgeClient,
    *,
    model_id: str,
    trials: int = 1,
    temperature: float = 0.0,
    prompts: PromptLibrary | None = None,
) -> RubricResult:
    """Single-prompt genre-rubric judging with optional self-consistency."""
    prompts = prompts or PromptLibrary()
    prompt = prompts.render_rubric(task.genre, task, writing)
    scores: list[int] = []
    transcript_ids: list[str] = []
    for trial in range(trials):
        request = JudgeRequest(
            model_id=model_id,
            prompt=prompt,
            temperature=temperature,
            trial_index=trial,
        )
        response = judge.complete(request)
        transcript_ids.append(request.cache_key())
        try:
            scores.append(max(1, min(10, extract_bracket_score(response.text))))
        except ExtractionError:
            continue
    if not scores:
        raise ExtractionError(
            f"rubric baseline: extraction failed on all {trials} trials"
        )
    return RubricResult(
        mean=sum(scores) / len(scores),
        worst=min(scores),
        best=max(scores),
        trials=tuple(scores),
        transcript_ids=tuple(transcript_ids),
    )


_SUBSCORE_LINE = re.compile(
    r"^\s*(?:[-*]\s*)?([A-Za-z][\w &/()'-]*?)\s*[:：]\s*([-+]?\d+(?:\.\d+)?)\s*$"
)
_TOTAL_LABELS = ("overall", "total", "final")


@dataclass(frozen=True)
class AutoPlanTrial:
    total: int
    subscores: dict[str, float]


@dataclass(frozen=True)
class AutoPlanResult:
    trials: tuple[AutoPlanTrial, ...]
    transcript_ids: tuple[str, ...] = ()

    @property
    def mean(self) -> float:
        return sum(t.total for t in self.trials) / len(self.trials)

    @property
    def worst(self) -> int:
        return min(t.total for t in self.trials)

    @property
    def best(self) -> int:
        return max(t.total for t in self.trials)


def parse_autoplan_response(text: str) -> AutoPlanTrial:
    """Final [[n]] total plus any "Name: score" subscore lines."""
    total = extract_bracket_score(text)
    subscores: dict[str, float] = {}
    for line in text.splitlines():
        match = _SUBSCORE_LINE.match(line)
        if not match:
            continue
        name = match.group(1).strip()
        if any(label in name.lower() for label in _TOTAL_LABELS):
            continue
        subscores[name] = float(match.group(2))
    return AutoPlanTrial(total=total, subscores=subscores)


def run_auto_plan_baseline(
    task: WritingTask,
    writing: str,
    judge: JudgeClient,
    *,
    model_id: str,
    trials: int = 1,
    temperature: float = 0.0,
    prompts: PromptLibrary | None = None,
) -> AutoPlanResult:
    """One-shot judging where the model picks its own dimensions and
    aggregation; the parsed subscores feed the negotiation-bias analysis."""
    prompts = prompts or PromptLibrary()
    prompt = prompts.render_autoplan(task, writing)
    parsed: list[AutoPlanTrial] = []
    transcript_ids: list[str] = []
    last_error: ExtractionError | None = None
    for trial in range(trials):
        request = JudgeRequest(
            model_id=model_id,
            prompt=prompt,
            temperature=temperature,
            trial_index=trial,
        )
        response = judge.complete(request)
        transcript_ids.append(request.cache_key())
        try:
            parsed.append(parse_autoplan_response(response.text))
        except ExtractionError as exc:
            last_error = exc
    if not parsed:
        raise last_error or ExtractionError("auto-plan: no parsable total")
    return AutoPlanResult(trials=tuple(parsed), transcript_ids=tuple(transcript_ids))
