"""Benchmark data model: writing tasks, system generations, human ratings.

File formats are line-delimited UTF-8 JSON (one object per line).  All types
are immutable after load and safe to share across evaluation workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from .errors import DuplicateIdError, InvariantError, ParseError


class TaskType(str, Enum):
    COMPLETION = "completion"
    GUIDE = "guide"
    OPEN = "open"

    @classmethod
    def parse(cls, value: str) -> "TaskType":
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise InvariantError(f"unknown task_type {value!r}") from None


CREATIVE = "creative"
FUNCTIONAL = "functional"

# Canonical genre set plus the aliases that show up in reports
# (comment ~ essay, regulation ~ official, plus a catch-all bucket).
DEFAULT_GENRE_CATEGORIES: dict[str, str] = {
    "fiction": CREATIVE,
    "poem": CREATIVE,
    "prose": CREATIVE,
    "essay": CREATIVE,
    "comment": CREATIVE,
    "argumentative": CREATIVE,
    "report": FUNCTIONAL,
    "summary": FUNCTIONAL,
    "letter": FUNCTIONAL,
    "speech": FUNCTIONAL,
    "plan": FUNCTIONAL,
    "contract": FUNCTIONAL,
    "official": FUNCTIONAL,
    "regulation": FUNCTIONAL,
    "others": FUNCTIONAL,
}


class GenreRegistry:
    """Configurable registry of allowed genre names and their category."""

    def __init__(self, categories: dict[str, str] | None = None):
        self._categories = dict(
            DEFAULT_GENRE_CATEGORIES if categories is None else categories
        )

    def register(self, name: str, category: str = FUNCTIONAL) -> None:
        if category not in (CREATIVE, FUNCTIONAL):
            raise InvariantError(f"unknown genre category {category!r}")
        self._categories[name] = category

    def __contains__(self, name: str) -> bool:
        return name in self._categories

    def names(self) -> list[str]:
        return sorted(self._categories)

    def category(self, name: str) -> str:
        try:
            return self._categories[name]
        except KeyError:
            raise InvariantError(f"unregistered genre {name!r}") from None

    def validate(self, name: str) -> str:
        if name not in self._categories:
            raise InvariantError(
                f"unregistered genre {name!r} (known: {', '.join(self.names())})"
            )
        return name


def char_length(text: str) -> int:
    """Length in non-whitespace Unicode scalar values."""
    return sum(1 for ch in text if not ch.isspace())


@dataclass(frozen=True)
class WritingTask:
    id: str
    task_type: TaskType
    genre: str
    instruction: str
    reference: str
    grounding: str | None = None
    word_target: int | None = None

    def validate(self, registry: GenreRegistry | None = None) -> "WritingTask":
        if not self.id:
            raise InvariantError("task id must be non-empty")
        if not self.instruction.strip():
            raise InvariantError(f"task {self.id}: instruction must be non-empty")
        if not self.reference.strip():
            raise InvariantError(f"task {self.id}: reference must be non-empty")
        if self.task_type is TaskType.OPEN and self.grounding is not None:
            raise InvariantError(
                f"task {self.id}: open tasks must omit grounding entirely"
            )
        if self.word_target is not None and self.word_target <= 0:
            raise InvariantError(f"task {self.id}: word_target must be positive")
        (registry or GenreRegistry()).validate(self.genre)
        return self

    def to_dict(self) -> dict:
        record = {
            "id": self.id,
            "task_type": self.task_type.value,
            "genre": self.genre,
            "instruction": self.instruction,
            "reference": self.reference,
        }
        if self.grounding is not None:
            record["grounding"] = self.grounding
        if self.word_target is not None:
            record["word_target"] = self.word_target
        return record

    @classmethod
    def from_dict(cls, record: dict) -> "WritingTask":
        try:
            task = cls(
                id=str(record["id"]),
                task_type=TaskType.parse(record["task_type"]),
                genre=str(record["genre"]),
                instruction=str(record["instruction"]),
                reference=str(record["reference"]),
                grounding=(
                    str(record["grounding"]) if record.get("grounding") is not None else None
                ),
                word_target=(
                    int(record["word_target"]) if record.get("word_target") is not None else None
                ),
            )
        except KeyError as exc:
            raise InvariantError(f"missing required key {exc.args[0]!r}") from None
        return task


@dataclass(frozen=True)
class GenerationRecord:
    task_id: str
    system_id: str
    text: str

    def validate(self, known_task_ids: set[str] | None = None) -> "GenerationRecord":
        if not self.task_id or not self.system_id:
            raise InvariantError("generation must carry task_id and system_id")
        if not self.text.strip():
            raise InvariantError(
                f"generation {self.task_id}/{self.system_id}: text must be non-empty"
            )
        if known_task_ids is not None and self.task_id not in known_task_ids:
            raise InvariantError(
                f"generation references unknown task id {self.task_id!r}"
            )
        return self

    def to_dict(self) -> dict:
        return {"task_id": self.task_id, "system_id": self.system_id, "text": self.text}

    @classmethod
    def from_dict(cls, record: dict) -> "GenerationRecord":
        try:
            return cls(
                task_id=str(record["task_id"]),
                system_id=str(record["system_id"]),
                text=str(record["text"]),
            )
        except KeyError as exc:
            raise InvariantError(f"missing required key {exc.args[0]!r}") from None


@dataclass(frozen=True)
class HumanRating:
    task_id: str
    system_id: str
    annotator_id: str
    score: int

    def validate(self) -> "HumanRating":
        if self.score not in (1, 2, 3, 4, 5):
            raise InvariantError(
                f"rating {self.task_id}/{self.system_id}: score must be in 1..5, "
                f"got {self.score}"
            )
        return self

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "system_id": self.system_id,
            "annotator_id": self.annotator_id,
            "score": self.score,
        }

    @classmethod
    def from_dict(cls, record: dict) -> "HumanRating":
        try:
            return cls(
                task_id=str(record["task_id"]),
                system_id=str(record["system_id"]),
                annotator_id=str(record["annotator_id"]),
                score=int(record["score"]),
            )
        except KeyError as exc:
            raise InvariantError(f"missing required key {exc.args[0]!r}") from None


def _iter_jsonl(path: str | Path):
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, line_no, f"invalid JSON: {exc.msg}") from None
            if not isinstance(record, dict):
                raise ParseError(path, line_no, "record must be a JSON object")
            yield line_no, record


def load_tasks(path: str | Path, registry: GenreRegistry | None = None) -> list[WritingTask]:
    """Load and validate a task file; order preserved, duplicate ids rejected."""
    registry = registry or GenreRegistry()
    tasks: list[WritingTask] = []
    seen: set[str] = set()
    for line_no, record in _iter_jsonl(path):
        try:
            task = WritingTask.from_dict(record).validate(registry)
        except InvariantError as exc:
            raise ParseError(path, line_no, str(exc)) from None
        if task.id in seen:
            raise DuplicateIdError(f"{path}:{line_no}: duplicate task id {task.id!r}")
        seen.add(task.id)
        tasks.append(task)
    return tasks


def load_generations(
    path: str | Path, known_task_ids: set[str] | None = None
) -> list[GenerationRecord]:
    records: list[GenerationRecord] = []
    for line_no, record in _iter_jsonl(path):
        try:
            records.append(GenerationRecord.from_dict(record).validate(known_task_ids))
        except InvariantError as exc:
            raise ParseError(path, line_no, str(exc)) from None
    return records


def load_ratings(path: str | Path) -> list[HumanRating]:
    ratings: list[HumanRating] = []
    for line_no, record in _iter_jsonl(path):
        try:
            ratings.append(HumanRating.from_dict(record).validate())
        except InvariantError as exc:
            raise ParseError(path, line_no, str(exc)) from None
    return ratings


def dump_jsonl(records, path: str | Path) -> None:
    """Write records (objects with to_dict, or plain dicts) as JSONL."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            payload = record.to_dict() if hasattr(record, "to_dict") else record
            handle.write(json.dumps(payload, ensure_ascii=False, sort_keys=True))
            handle.write("\n")


@dataclass(frozen=True)
class GroupStats:
    count: int
    mean_instruction_len: float | None
    mean_grounding_len: float | None
    mean_reference_len: float | None


@dataclass(frozen=True)
class DatasetStats:
    """Per (task_type, creative/functional) descriptive statistics."""

    groups: dict[tuple[TaskType, str], GroupStats]

    def group(self, task_type: TaskType, category: str) -> GroupStats:
        return self.groups.get((task_type, category), GroupStats(0, None, None, None))

    def to_dict(self) -> dict:
        out = {}
        for (task_type, category), stats in sorted(
            self.groups.items(), key=lambda item: (item[0][0].value, item[0][1])
        ):
            out[f"{category}/{task_type.value}"] = {
                "count": stats.count,
                "mean_instruction_len": stats.mean_instruction_len,
                "mean_grounding_len": stats.mean_grounding_len,
                "mean_reference_len": stats.mean_reference_len,
            }
        return out


def compute_stats(
    tasks: list[WritingTask], registry: GenreRegistry | None = None
) -> DatasetStats:
    """Group tasks by (task_type, category) and average character lengths.

    Groups where no member carries grounding report the grounding mean as
    absent (None) rather than zero.
    """
    registry = registry or GenreRegistry()
    buckets: dict[tuple[TaskType, str], list[WritingTask]] = {}
    for task in tasks:
        key = (task.task_type, registry.category(task.genre))
        buckets.setdefault(key, []).append(task)

    groups = {}
    for key, members in buckets.items():
        grounding_lens = [
            char_length(task.grounding) for task in members if task.grounding is not None
        ]
        groups[key] = GroupStats(
            count=len(members),
            mean_instruction_len=_mean([char_length(t.instruction) for t in members]),
            mean_grounding_len=_mean(grounding_lens),
            mean_reference_len=_mean([char_length(t.reference) for t in members]),
        )
    return DatasetStats(groups=groups)


def _mean(values: list[int]) -> float | None:
    if not values:
        return None
    return sum(values) / len(values)
