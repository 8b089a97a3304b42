"""Robustness disturbances and the score-delta report.

Three disturbances: drop removes up to three paragraphs (or sentences for
short texts), repeat duplicates up to three paragraphs at new positions,
transfer rewrites the text into another genre through the judge.  A sound
metric should respond to each with a score decrease; the report flags any
increase as an undesired sign.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from enum import Enum

from .errors import JudgeError, TreescoreError
from .judge import JudgeClient, JudgeRequest
from .prompts import PromptLibrary


class PerturbationKind(str, Enum):
    DROP = "drop"
    REPEAT = "repeat"
    TRANSFER = "transfer"


TRANSFER_TARGETS = ("comment", "letter", "official", "poem")

_SENTENCE_SPLIT = re.compile(r"(?<=[。！？!?])")


def split_paragraphs(text: str) -> list[str]:
    """Maximal runs of non-empty lines separated by blank lines."""
    paragraphs: list[str] = []
    current: list[str] = []
    for line in text.splitlines():
        if line.strip():
            current.append(line)
        elif current:
            paragraphs.append("\n".join(current))
            current = []
    if current:
        paragraphs.append("\n".join(current))
    return paragraphs


def split_sentences(text: str) -> list[str]:
    """Split on sentence-final punctuation, keeping the terminator."""
    return [piece for piece in _SENTENCE_SPLIT.split(text) if piece.strip()]


def join_paragraphs(paragraphs: list[str]) -> str:
    return "\n\n".join(paragraphs)


def drop(text: str, seed: int) -> str:
    """Remove 1-3 units (paragraphs when the text has at least four,
    sentences otherwise), always leaving at least one unit."""
    paragraphs = split_paragraphs(text)
    if len(paragraphs) >= 4:
        units, joiner = paragraphs, join_paragraphs
    else:
        sentences = split_sentences(text)
        if len(paragraphs) < 2 and len(sentences) < 2:
            raise TreescoreError(
                "text too short to drop from: needs >= 2 paragraphs or sentences"
            )
        if len(sentences) >= 2:
            units, joiner = sentences, "".join
        else:
            units, joiner = paragraphs, join_paragraphs
    rng = random.Random(seed)
    k = rng.randint(1, min(3, len(units) - 1))
    removed = set(rng.sample(range(len(units)), k))
    survivors = [unit for index, unit in enumerate(units) if index not in removed]
    return joiner(survivors)


def repeat(text: str, seed: int) -> str:
    """Duplicate 1-3 paragraphs, inserting each copy away from its origin."""
    paragraphs = split_paragraphs(text)
    if not paragraphs:
        raise TreescoreError("text has no paragraphs to repeat")
    rng = random.Random(seed)
    n = len(paragraphs)
    k = rng.randint(1, min(3, n))
    chosen = rng.sample(range(n), k)

    # Gap g sits before original paragraph g; gaps adjacent to the source
    # (g == i or g == i + 1) are avoided unless the text is one paragraph.
    insertions: list[tuple[int, str]] = []
    for index in chosen:
        gaps = [g for g in range(n + 1) if g not in (index, index + 1)]
        gap = rng.choice(gaps) if gaps else rng.choice([0, 1])
        insertions.append((gap, paragraphs[index]))

    result: list[str] = []
    for g in range(n + 1):
        for gap, copy_text in insertions:
            if gap == g:
                result.append(copy_text)
        if g < n:
            result.append(paragraphs[g])
    return join_paragraphs(result)


def transfer(
    text: str,
    target_genre: str,
    judge: JudgeClient,
    *,
    model_id: str,
    temperature: float = 0.0,
    prompts: PromptLibrary | None = None,
) -> str:
    """Rewrite the text into the target genre through the judge."""
    if target_genre not in TRANSFER_TARGETS:
        raise TreescoreError(
            f"transfer target must be one of {TRANSFER_TARGETS}, got {target_genre!r}"
        )
    prompt = (prompts or PromptLibrary()).render_transfer(target_genre, text)
    response = judge.complete(
        JudgeRequest(model_id=model_id, prompt=prompt, temperature=temperature)
    )
    if not response.text.strip():
        raise JudgeError("transfer rewrite came back empty")
    return response.text


@dataclass(frozen=True)
class Perturbation:
    kind: PerturbationKind
    seed: int = 0
    target_genre: str | None = None

    def label(self) -> str:
        if self.kind is PerturbationKind.TRANSFER:
            return f"transfer:{self.target_genre}"
        return self.kind.value


@dataclass(frozen=True)
class DeltaCell:
    delta: float
    undesired: bool  # score went up under a disturbance


@dataclass(frozen=True)
class RobustnessReport:
    """Per metric: the initial mean and the per-disturbance mean deltas."""

    initial_means: dict[str, float]
    deltas: dict[str, dict[str, DeltaCell]]  # metric -> label -> cell

    def to_dict(self) -> dict:
        return {
            "initial_means": dict(sorted(self.initial_means.items())),
            "deltas": {
                metric: {
                    label: {"delta": cell.delta, "undesired": cell.undesired}
                    for label, cell in sorted(cells.items())
                }
                for metric, cells in sorted(self.deltas.items())
            },
        }


def robustness_report(
    initial: dict[tuple[str, str], dict[str, float]],
    perturbed: dict[str, dict[tuple[str, str], dict[str, float]]],
) -> RobustnessReport:
    """mean(perturbed) - mean(initial) per metric and disturbance label.

    Coverage must match exactly: every disturbance set scores the same
    (task, system) keys as the initial set.
    """
    if not initial:
        raise TreescoreError("no initial scores")
    keys = set(initial)
    metrics = sorted({m for row in initial.values() for m in row})

    def mean_of(rows: dict, metric: str) -> float:
        values = [row[metric] for row in rows.values() if metric in row]
        return sum(values) / len(values)

    initial_means = {metric: mean_of(initial, metric) for metric in metrics}
    deltas: dict[str, dict[str, DeltaCell]] = {metric: {} for metric in metrics}
    for label, rows in perturbed.items():
        if set(rows) != keys:
            missing = keys.symmetric_difference(rows)
            raise TreescoreError(
                f"{label}: perturbed coverage differs on {sorted(missing)[:3]}"
            )
        for metric in metrics:
            delta = mean_of(rows, metric) - initial_means[metric]
            deltas[metric][label] = DeltaCell(delta=delta, undesired=delta > 0)
    return RobustnessReport(initial_means=initial_means, deltas=deltas)
