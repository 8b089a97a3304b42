"""Prompt asset loading and rendering.

Prompts live as one text file per leaf (plus weighting, baseline and
transfer templates) under assets/prompts/<language>/.  Slots use
curly-brace names ({instruction}, {reference}, {content}, {target_genre})
and are filled by plain string replacement, so prompt bodies may contain
any other characters freely.

Reference-free rendering removes the block delimited by the
[Reference Writing Start] / [Reference Writing End] marker lines.
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path

from .data import WritingTask
from .errors import AssetError
from .tree import Family, LeafTrait

LEAF_ASSETS: dict[LeafTrait, str] = {
    LeafTrait.OPENING_ENDING: "opening_ending.txt",
    LeafTrait.LANGUAGE_RHETORIC: "language_rhetoric.txt",
    LeafTrait.LOGICS: "logics.txt",
    LeafTrait.EMOTION: "emotion.txt",
    LeafTrait.PLOTS: "plots.txt",
    LeafTrait.PARAGRAPHING: "paragraphing.txt",
    LeafTrait.IMPRESSION: "impression.txt",
}

WEIGHTING_ASSETS: dict[Family, str] = {
    Family.CONTENT: "weighting_content.txt",
    Family.FORMAT: "weighting_format.txt",
}

# Display labels used both in the weighting prompts and when pulling the
# negotiated numbers back out of the response.
DIMENSION_LABELS: dict[Family, tuple[tuple[LeafTrait, str], ...]] = {
    Family.CONTENT: (
        (LeafTrait.OPENING_ENDING, "Introduction and Conclusion"),
        (LeafTrait.LANGUAGE_RHETORIC, "Language and Rhetoric"),
        (LeafTrait.LOGICS, "Argumentative Logic"),
        (LeafTrait.EMOTION, "Emotional Expression"),
    ),
    Family.FORMAT: (
        (LeafTrait.PLOTS, "Plot and Structure"),
        (LeafTrait.PARAGRAPHING, "Paragraphing"),
        (LeafTrait.FORMATTING, "Formatting"),
    ),
}

_REFERENCE_BLOCK = re.compile(
    r"\n?^\[Reference Writing Start\]$.*?^\[Reference Writing End\]$\n?",
    re.MULTILINE | re.DOTALL,
)


class PromptLibrary:
    """Resolves and renders prompt assets for one language."""

    def __init__(
        self,
        language: str = "en",
        root: str | Path | None = None,
        reference_free: bool = False,
    ):
        self.language = language
        self.root = Path(root) if root is not None else None
        self.reference_free = reference_free
        self._cache: dict[str, str] = {}

    def _read(self, name: str) -> str:
        if name in self._cache:
            return self._cache[name]
        if self.root is not None:
            path = self.root / name
            if not path.exists():
                raise AssetError(f"prompt asset not found: {path}")
            text = path.read_text(encoding="utf-8")
        else:
            ref = resources.files("treescore").joinpath(
                f"assets/prompts/{self.language}/{name}"
            )
            try:
                text = ref.read_text(encoding="utf-8")
            except FileNotFoundError:
                raise AssetError(
                    f"prompt asset not found: {self.language}/{name}"
                ) from None
        self._cache[name] = text
        return text

    def _strip_reference(self, template: str) -> str:
        return _REFERENCE_BLOCK.sub("\n", template)

    def _fill(self, template: str, slots: dict[str, str]) -> str:
        rendered = template
        for key, value in slots.items():
            rendered = rendered.replace("{" + key + "}", value)
        return rendered

    def leaf_template(self, leaf: LeafTrait) -> str:
        try:
            name = LEAF_ASSETS[leaf]
        except KeyError:
            raise AssetError(f"no prompt asset mapped for leaf {leaf.value}") from None
        return self._read(name)

    def render_leaf(self, leaf: LeafTrait, task: WritingTask, writing: str) -> str:
        template = self.leaf_template(leaf)
        if self.reference_free:
            template = self._strip_reference(template)
        return self._fill(
            template,
            {
                "instruction": task.instruction,
                "reference": task.reference,
                "content": writing,
            },
        )

    def render_weighting(self, family: Family, instruction: str) -> str:
        if not instruction or not instruction.strip():
            raise AssetError("instruction must be non-empty")
        template = self._read(WEIGHTING_ASSETS[family])
        return self._fill(template, {"instruction": instruction})

    def render_rubric(self, genre: str, task: WritingTask, writing: str) -> str:
        template = self._read(f"rubrics/{genre}.txt")
        if self.reference_free:
            template = self._strip_reference(template)
        return self._fill(
            template,
            {
                "instruction": task.instruction,
                "reference": task.reference,
                "content": writing,
            },
        )

    def render_autoplan(self, task: WritingTask, writing: str) -> str:
        template = self._read("autoplan.txt")
        if self.reference_free:
            template = self._strip_reference(template)
        return self._fill(
            template,
            {
                "instruction": task.instruction,
                "reference": task.reference,
                "content": writing,
            },
        )

    def render_transfer(self, target_genre: str, text: str) -> str:
        template = self._read("transfer.txt")
        return self._fill(template, {"target_genre": target_genre, "content": text})
