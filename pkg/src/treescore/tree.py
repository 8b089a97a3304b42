"""Evaluation-tree data model and deterministic score aggregation.

The tree has a root, up to three primary nodes (content / format /
impression) and a fixed canonical leaf set per primary node.  Primary
scores are weighted sums of leaf scores; the root is a leaf-count-weighted
mean of the primary scores (a plain mean of primaries is available as a
configuration option).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

from .data import GenerationRecord, TaskType, WritingTask
from .errors import InvariantError, ScorerError, WeightError


class Family(str, Enum):
    CONTENT = "content"
    FORMAT = "format"
    IMPRESSION = "impression"


class LeafTrait(str, Enum):
    OPENING_ENDING = "opening_ending"
    LANGUAGE_RHETORIC = "language_rhetoric"
    LOGICS = "logics"
    EMOTION = "emotion"
    PLOTS = "plots"
    PARAGRAPHING = "paragraphing"
    FORMATTING = "formatting"
    IMPRESSION = "impression"

    @property
    def family(self) -> Family:
        return _LEAF_FAMILY[self]


_LEAF_FAMILY = {
    LeafTrait.OPENING_ENDING: Family.CONTENT,
    LeafTrait.LANGUAGE_RHETORIC: Family.CONTENT,
    LeafTrait.LOGICS: Family.CONTENT,
    LeafTrait.EMOTION: Family.CONTENT,
    LeafTrait.PLOTS: Family.FORMAT,
    LeafTrait.PARAGRAPHING: Family.FORMAT,
    LeafTrait.FORMATTING: Family.FORMAT,
    LeafTrait.IMPRESSION: Family.IMPRESSION,
}

CANONICAL_LEAVES: dict[Family, tuple[LeafTrait, ...]] = {
    Family.CONTENT: (
        LeafTrait.OPENING_ENDING,
        LeafTrait.LANGUAGE_RHETORIC,
        LeafTrait.LOGICS,
        LeafTrait.EMOTION,
    ),
    Family.FORMAT: (LeafTrait.PLOTS, LeafTrait.PARAGRAPHING, LeafTrait.FORMATTING),
    Family.IMPRESSION: (LeafTrait.IMPRESSION,),
}

# Completion tasks carry rich grounding context and skip the format node.
DEFAULT_FAMILY_MASKS: dict[TaskType, frozenset[Family]] = {
    TaskType.COMPLETION: frozenset({Family.CONTENT, Family.IMPRESSION}),
    TaskType.GUIDE: frozenset(Family),
    TaskType.OPEN: frozenset(Family),
}

WEIGHT_SUM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class WeightVector:
    """Per-leaf weights for one family: each in (-1, 1), summing to 1."""

    weights: tuple[float, ...]

    def __post_init__(self):
        if not self.weights:
            raise WeightError("weight vector must be non-empty")
        for w in self.weights:
            if not (-1.0 < w < 1.0):
                raise WeightError(f"weight {w} outside the open interval (-1, 1)")
        total = math.fsum(self.weights)
        if abs(total - 1.0) > WEIGHT_SUM_TOLERANCE:
            raise WeightError(f"weights sum to {total}, expected 1")

    def __len__(self) -> int:
        return len(self.weights)

    def __iter__(self):
        return iter(self.weights)

    @classmethod
    def uniform(cls, n: int) -> "WeightVector":
        return cls(weights=tuple(1.0 / n for _ in range(n)))


class AblationMode(str, Enum):
    FULL = "Full"
    WITHOUT_CONTENT = "WithoutContent"
    WITHOUT_FORMAT = "WithoutFormat"
    ONLY_CONTENT = "OnlyContent"
    ONLY_FORMAT = "OnlyFormat"
    ONLY_IMPRESSION = "OnlyImpression"


_ABLATION_FAMILIES = {
    AblationMode.FULL: frozenset(Family),
    AblationMode.WITHOUT_CONTENT: frozenset({Family.FORMAT, Family.IMPRESSION}),
    AblationMode.WITHOUT_FORMAT: frozenset({Family.CONTENT, Family.IMPRESSION}),
    AblationMode.ONLY_CONTENT: frozenset({Family.CONTENT}),
    AblationMode.ONLY_FORMAT: frozenset({Family.FORMAT}),
    AblationMode.ONLY_IMPRESSION: frozenset({Family.IMPRESSION}),
}


@dataclass(frozen=True)
class EvalTree:
    enabled_families: frozenset[Family] = frozenset(Family)
    leaves: dict[Family, tuple[LeafTrait, ...]] = field(
        default_factory=lambda: dict(CANONICAL_LEAVES)
    )

    def __post_init__(self):
        if not self.enabled_families:
            raise InvariantError("tree must keep at least one family")
        for family in self.enabled_families:
            for leaf in self.leaves.get(family, ()):
                if leaf.family is not family:
                    raise InvariantError(f"leaf {leaf.value} misfiled under {family.value}")

    def family_leaves(self, family: Family) -> tuple[LeafTrait, ...]:
        if family not in self.enabled_families:
            return ()
        return self.leaves[family]

    def enabled_leaves(self) -> tuple[LeafTrait, ...]:
        out: list[LeafTrait] = []
        for family in Family:
            out.extend(self.family_leaves(family))
        return tuple(out)

    def for_task_type(
        self,
        task_type: TaskType,
        masks: dict[TaskType, frozenset[Family]] | None = None,
    ) -> "EvalTree":
        mask = (masks or DEFAULT_FAMILY_MASKS)[task_type]
        families = self.enabled_families & mask
        if not families:
            raise InvariantError(
                f"family mask for {task_type.value} removes every enabled family"
            )
        return EvalTree(enabled_families=families, leaves=self.leaves)


def ablate(tree: EvalTree, mode: AblationMode) -> EvalTree:
    """Restrict the tree to the families kept by an ablation mode."""
    families = tree.enabled_families & _ABLATION_FAMILIES[mode]
    if not families:
        raise InvariantError(f"ablation {mode.value} would remove every family")
    return EvalTree(enabled_families=families, leaves=tree.leaves)


def aggregate_primary(leaf_scores, weights: WeightVector) -> float:
    """Weighted sum of one family's leaf scores."""
    scores = list(leaf_scores)
    if len(scores) != len(weights):
        raise InvariantError(
            f"{len(scores)} scores but {len(weights)} weights"
        )
    return math.fsum(w * s for w, s in zip(weights, scores))


def aggregate_root(
    primary_scores: dict[Family, float],
    leaf_counts: dict[Family, int],
    strategy: str = "leaf_count",
) -> float:
    """Combine primary scores into the root score.

    "leaf_count" weights each family by its number of leaves; "family_mean"
    is the plain unweighted mean of the primary scores.
    """
    if not primary_scores:
        raise InvariantError("no primary scores to aggregate")
    if set(primary_scores) != set(leaf_counts):
        raise InvariantError(
            f"family mismatch: scores for {sorted(f.value for f in primary_scores)}, "
            f"counts for {sorted(f.value for f in leaf_counts)}"
        )
    for family, count in leaf_counts.items():
        if count < 1:
            raise InvariantError(f"leaf count for {family.value} must be >= 1")
    if strategy == "family_mean":
        return math.fsum(primary_scores.values()) / len(primary_scores)
    if strategy != "leaf_count":
        raise InvariantError(f"unknown root strategy {strategy!r}")
    total = sum(leaf_counts.values())
    return math.fsum(
        leaf_counts[family] * score for family, score in primary_scores.items()
    ) / total


@dataclass(frozen=True)
class LeafJudgment:
    """One scored leaf: the final score plus the raw per-trial records."""

    leaf: LeafTrait
    score: float
    trials: tuple[int, ...]
    reason: str = ""
    transcript_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if not (0.0 <= self.score <= 10.0):
            raise InvariantError(
                f"{self.leaf.value}: score {self.score} outside [0, 10]"
            )

    def to_dict(self) -> dict:
        return {
            "leaf": self.leaf.value,
            "score": self.score,
            "trials": list(self.trials),
            "reason": self.reason,
            "transcript_ids": list(self.transcript_ids),
        }


SCORE_EPS = 1e-9


@dataclass(frozen=True)
class ScoreCard:
    """Complete per-sample evaluation record."""

    task_id: str
    system_id: str
    leaf_scores: dict[LeafTrait, float]
    primary_scores: dict[Family, float]
    root_score: float
    content_weights: WeightVector | None = None
    format_weights: WeightVector | None = None
    weight_sources: dict[Family, str] = field(default_factory=dict)
    root_strategy: str = "leaf_count"
    judgments: tuple[LeafJudgment, ...] = ()
    transcript_refs: tuple[str, ...] = ()

    def validate(self, tree: EvalTree) -> "ScoreCard":
        for family in tree.enabled_families:
            leaves = tree.family_leaves(family)
            scores = [self.leaf_scores[leaf] for leaf in leaves]
            weights = self._weights_for(family)
            if weights is not None:
                expected = aggregate_primary(scores, weights)
            else:
                # Impression has a single leaf; its primary is the leaf score.
                expected = math.fsum(scores) / len(scores)
            if abs(expected - self.primary_scores[family]) > SCORE_EPS:
                raise InvariantError(
                    f"{family.value} primary score {self.primary_scores[family]} "
                    f"!= recorded weighted sum {expected}"
                )
        counts = {f: len(tree.family_leaves(f)) for f in tree.enabled_families}
        expected_root = aggregate_root(self.primary_scores, counts, self.root_strategy)
        if abs(expected_root - self.root_score) > SCORE_EPS:
            raise InvariantError(
                f"root score {self.root_score} != recomputed {expected_root}"
            )
        return self

    def _weights_for(self, family: Family) -> WeightVector | None:
        if family is Family.CONTENT:
            return self.content_weights
        if family is Family.FORMAT:
            return self.format_weights
        return None

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "system_id": self.system_id,
            "leaf_scores": {leaf.value: s for leaf, s in self.leaf_scores.items()},
            "primary_scores": {f.value: s for f, s in self.primary_scores.items()},
            "root_score": self.root_score,
            "content_weights": list(self.content_weights) if self.content_weights else None,
            "format_weights": list(self.format_weights) if self.format_weights else None,
            "weight_sources": {f.value: s for f, s in self.weight_sources.items()},
            "root_strategy": self.root_strategy,
            "judgments": [j.to_dict() for j in self.judgments],
            "transcript_refs": list(self.transcript_refs),
        }

    @classmethod
    def from_dict(cls, record: dict) -> "ScoreCard":
        judgments = tuple(
            LeafJudgment(
                leaf=LeafTrait(j["leaf"]),
                score=j["score"],
                trials=tuple(j["trials"]),
                reason=j.get("reason", ""),
                transcript_ids=tuple(j.get("transcript_ids", ())),
            )
            for j in record.get("judgments", ())
        )
        return cls(
            task_id=record["task_id"],
            system_id=record["system_id"],
            leaf_scores={LeafTrait(k): v for k, v in record["leaf_scores"].items()},
            primary_scores={Family(k): v for k, v in record["primary_scores"].items()},
            root_score=record["root_score"],
            content_weights=(
                WeightVector(tuple(record["content_weights"]))
                if record.get("content_weights")
                else None
            ),
            format_weights=(
                WeightVector(tuple(record["format_weights"]))
                if record.get("format_weights")
                else None
            ),
            weight_sources={
                Family(k): v for k, v in record.get("weight_sources", {}).items()
            },
            root_strategy=record.get("root_strategy", "leaf_count"),
            judgments=judgments,
            transcript_refs=tuple(record.get("transcript_refs", ())),
        )

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True)


def load_scorecards(path) -> list[ScoreCard]:
    from .data import _iter_jsonl

    return [ScoreCard.from_dict(record) for _, record in _iter_jsonl(path)]


def evaluate_sample(
    task: WritingTask,
    generation: GenerationRecord,
    tree: EvalTree,
    weight_plan,
    scorer_registry: dict[LeafTrait, object],
    masks: dict[TaskType, frozenset[Family]] | None = None,
    root_strategy: str = "leaf_count",
) -> ScoreCard:
    """Score one generation: run each enabled leaf's scorer, then aggregate.

    The weight plan must cover every enabled weighted family; the registry
    must supply a scorer per enabled leaf.  Deterministic given identical
    scorer outputs.
    """
    effective = tree.for_task_type(task.task_type, masks)

    judgments: list[LeafJudgment] = []
    leaf_scores: dict[LeafTrait, float] = {}
    for leaf in effective.enabled_leaves():
        scorer = scorer_registry.get(leaf)
        if scorer is None:
            raise ScorerError(leaf, "no scorer registered")
        try:
            judgment = scorer(task, generation.text)
        except ScorerError:
            raise
        except Exception as exc:
            raise ScorerError(leaf, str(exc)) from exc
        if judgment.leaf is not leaf:
            raise ScorerError(leaf, f"scorer returned judgment for {judgment.leaf.value}")
        judgments.append(judgment)
        leaf_scores[leaf] = judgment.score

    primary_scores: dict[Family, float] = {}
    weights_used: dict[Family, WeightVector] = {}
    for family in effective.enabled_families:
        leaves = effective.family_leaves(family)
        scores = [leaf_scores[leaf] for leaf in leaves]
        if family is Family.IMPRESSION:
            primary_scores[family] = math.fsum(scores) / len(scores)
            continue
        weights = weight_plan.weights_for(family)
        if weights is None:
            raise InvariantError(
                f"weight plan covers no {family.value} weights for task {task.id}"
            )
        if len(weights) != len(leaves):
            raise InvariantError(
                f"{family.value}: plan has {len(weights)} weights "
                f"for {len(leaves)} leaves"
            )
        weights_used[family] = weights
        primary_scores[family] = aggregate_primary(scores, weights)

    counts = {f: len(effective.family_leaves(f)) for f in effective.enabled_families}
    root = aggregate_root(primary_scores, counts, root_strategy)

    card = ScoreCard(
        task_id=task.id,
        system_id=generation.system_id,
        leaf_scores=leaf_scores,
        primary_scores=primary_scores,
        root_score=root,
        content_weights=weights_used.get(Family.CONTENT),
        format_weights=weights_used.get(Family.FORMAT),
        weight_sources={
            family: source
            for family, source in (
                weight_plan.sources() if weight_plan is not None else {}
            ).items()
            if family in weights_used
        },
        root_strategy=root_strategy,
        judgments=tuple(judgments),
        transcript_refs=tuple(
            tid for judgment in judgments for tid in judgment.transcript_ids
        ),
    )
    return card.validate(effective)
