"""LLM-backed leaf scorers plus the deterministic formatting expert.

Rubric leaves sample n judgments, pull the committed score out of the
final [[n]] marker, clamp to the leaf's raw range and average.  The
paragraphing expert scores on a 1-3 raw scale that is projected onto 0-10
before averaging.  The formatting expert needs no judge at all.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .data import WritingTask
from .errors import ExtractionError, ScorerError
from .format_rules import check_formatting
from .judge import JudgeClient, JudgeRequest
from .prompts import PromptLibrary
from .tree import LeafJudgment, LeafTrait

_BRACKET = re.compile(r"\[\[\s*([-+]?\d+)\s*\]\]")

CONTENT_LEAVES = (
    LeafTrait.OPENING_ENDING,
    LeafTrait.LANGUAGE_RHETORIC,
    LeafTrait.LOGICS,
    LeafTrait.EMOTION,
)


def extract_bracket_score(text: str) -> int:
    """Integer inside the last [[n]] occurrence; judges often restate scores
    and the final statement is the committed one."""
    matches = _BRACKET.findall(text or "")
    if not matches:
        raise ExtractionError("no [[n]] score marker found")
    return int(matches[-1])


def project_paragraph_score(x: int) -> float:
    """Map a raw 1-3 paragraphing grade onto the shared 0-10 scale."""
    if x not in (1, 2, 3):
        raise ScorerError(LeafTrait.PARAGRAPHING, f"raw grade {x} outside 1..3")
    return 5.0 * (x - 1)


def _clamp(value: int, low: int, high: int) -> int:
    return max(low, min(high, value))


def _sample_trials(
    leaf: LeafTrait,
    prompt: str,
    judge: JudgeClient,
    model_id: str,
    trials: int,
    temperature: float,
    low: int,
    high: int,
) -> tuple[list[int], list[str], str]:
    """Run n judge samples and extract one clamped raw score per trial."""
    if trials < 1:
        raise ScorerError(leaf, "trial count must be >= 1")
    raw_scores: list[int] = []
    transcript_ids: list[str] = []
    last_text = ""
    failures = 0
    for trial in range(trials):
        request = JudgeRequest(
            model_id=model_id,
            prompt=prompt,
            temperature=temperature,
            trial_index=trial,
        )
        response = judge.complete(request)
        transcript_ids.append(request.cache_key())
        last_text = response.text
        try:
            value = extract_bracket_score(response.text)
        except ExtractionError:
            failures += 1
            continue
        raw_scores.append(_clamp(value, low, high))
    if not raw_scores:
        raise ScorerError(leaf, f"score extraction failed on all {trials} trials")
    return raw_scores, transcript_ids, last_text


def _judged_leaf(
    leaf: LeafTrait,
    task: WritingTask,
    writing: str,
    judge: JudgeClient,
    model_id: str,
    trials: int,
    temperature: float,
    prompts: PromptLibrary,
    low: int,
    high: int,
    project=None,
) -> LeafJudgment:
    prompt = prompts.render_leaf(leaf, task, writing)
    raw, transcript_ids, reason = _sample_trials(
        leaf, prompt, judge, model_id, trials, temperature, low, high
    )
    values = [project(r) if project else float(r) for r in raw]
    return LeafJudgment(
        leaf=leaf,
        score=sum(values) / len(values),
        trials=tuple(raw),
        reason=reason,
        transcript_ids=tuple(transcript_ids),
    )


def score_content_leaf(
    leaf: LeafTrait,
    task: WritingTask,
    writing: str,
    judge: JudgeClient,
    *,
    model_id: str,
    trials: int = 1,
    temperature: float = 0.0,
    prompts: PromptLibrary | None = None,
) -> LeafJudgment:
    if leaf not in CONTENT_LEAVES:
        raise ScorerError(leaf, "not a content leaf")
    return _judged_leaf(
        leaf, task, writing, judge, model_id, trials, temperature,
        prompts or PromptLibrary(), 1, 10,
    )


def score_plots(
    task: WritingTask,
    writing: str,
    judge: JudgeClient,
    *,
    model_id: str,
    trials: int = 1,
    temperature: float = 0.0,
    prompts: PromptLibrary | None = None,
) -> LeafJudgment:
    return _judged_leaf(
        LeafTrait.PLOTS, task, writing, judge, model_id, trials, temperature,
        prompts or PromptLibrary(), 1, 10,
    )


def score_paragraphing(
    task: WritingTask,
    writing: str,
    judge: JudgeClient,
    *,
    model_id: str,
    trials: int = 1,
    temperature: float = 0.0,
    prompts: PromptLibrary | None = None,
) -> LeafJudgment:
    return _judged_leaf(
        LeafTrait.PARAGRAPHING, task, writing, judge, model_id, trials, temperature,
        prompts or PromptLibrary(), 1, 3, project=project_paragraph_score,
    )


def score_impression(
    task: WritingTask,
    writing: str,
    judge: JudgeClient,
    *,
    model_id: str,
    trials: int = 1,
    temperature: float = 0.0,
    prompts: PromptLibrary | None = None,
) -> LeafJudgment:
    return _judged_leaf(
        LeafTrait.IMPRESSION, task, writing, judge, model_id, trials, temperature,
        prompts or PromptLibrary(), 1, 10,
    )


def score_formatting(task: WritingTask, writing: str) -> LeafJudgment:
    """Deterministic 0/5/10 step-function judgment on titling structure."""
    verdict = check_formatting(writing)
    reason = "; ".join(
        f"{v.rule}@{v.line_no}: {v.excerpt[:60]}" for v in verdict.violations
    )
    return LeafJudgment(
        leaf=LeafTrait.FORMATTING,
        score=float(verdict.score),
        trials=(verdict.score,),
        reason=reason or "no violations",
    )


@dataclass(frozen=True)
class JudgedLeafScorer:
    """Registry entry binding one LLM leaf to a judge configuration."""

    leaf: LeafTrait
    judge: JudgeClient
    model_id: str
    trials: int = 1
    temperature: float = 0.0
    prompts: PromptLibrary | None = None

    def __call__(self, task: WritingTask, writing: str) -> LeafJudgment:
        kwargs = dict(
            model_id=self.model_id,
            trials=self.trials,
            temperature=self.temperature,
            prompts=self.prompts,
        )
        if self.leaf in CONTENT_LEAVES:
            return score_content_leaf(self.leaf, task, writing, self.judge, **kwargs)
        if self.leaf is LeafTrait.PLOTS:
            return score_plots(task, writing, self.judge, **kwargs)
        if self.leaf is LeafTrait.PARAGRAPHING:
            return score_paragraphing(task, writing, self.judge, **kwargs)
        if self.leaf is LeafTrait.IMPRESSION:
            return score_impression(task, writing, self.judge, **kwargs)
        raise ScorerError(self.leaf, "leaf has no judged scorer")


def make_scorer_registry(
    judges: dict[str, tuple[JudgeClient, str]],
    *,
    trials: dict[str, int] | None = None,
    temperature: dict[str, float] | None = None,
    prompts: PromptLibrary | None = None,
) -> dict[LeafTrait, object]:
    """Build a full leaf->scorer registry.

    `judges` maps the roles "content", "format", "impression" to a
    (client, model_id) pair; formatting is always the deterministic check.
    """
    trials = trials or {}
    temperature = temperature or {}
    registry: dict[LeafTrait, object] = {}

    def bind(leaf: LeafTrait, role: str):
        client, model_id = judges[role]
        registry[leaf] = JudgedLeafScorer(
            leaf=leaf,
            judge=client,
            model_id=model_id,
            trials=trials.get(role, 1),
            temperature=temperature.get(role, 0.0),
            prompts=prompts,
        )

    for leaf in CONTENT_LEAVES:
        bind(leaf, "content")
    bind(LeafTrait.PLOTS, "format")
    bind(LeafTrait.PARAGRAPHING, "format")
    bind(LeafTrait.IMPRESSION, "impression")
    registry[LeafTrait.FORMATTING] = score_formatting
    return registry
