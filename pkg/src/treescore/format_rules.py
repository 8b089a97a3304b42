"""Deterministic formatting assessment.

Two pieces: a stack-based outline parser that recognises markdown hashes,
Chinese section numerals, fullwidth-parenthesised Chinese numerals, ordered
lists and unordered dashes; and a step-function check that maps a document
to a formatting score of 0, 5 or 10.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field


HEADING_PATTERNS: list[tuple[re.Pattern, str]] = [
    (re.compile(r"^(#{1,6})\s*(.*)$"), "markdown"),
    (re.compile(r"^([一二三四五六七八九十]+[、.])\s*(.*)$"), "chinese"),
    (re.compile(r"^（([一二三四五六七八九十])）\s*(.*)$"), "chinese_second"),
    (re.compile(r"^(\d{1,2}\.)\s*(.*)$"), "ordered"),
    (re.compile(r"^(\-)\s*(.*)$"), "unordered"),
]


@dataclass
class HeadingNode:
    title: str
    kind: str
    children: list["HeadingNode"] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "kind": self.kind,
            "children": [child.to_dict() for child in self.children],
        }

    @classmethod
    def from_dict(cls, record: dict) -> "HeadingNode":
        return cls(
            title=record["title"],
            kind=record["kind"],
            children=[cls.from_dict(c) for c in record.get("children", [])],
        )


@dataclass(frozen=True)
class HeadingEvent:
    """One recognised heading line, with the state used to place it."""

    line_no: int
    line: str
    kind: str
    level: int
    stack_depth: int      # depth before any popping for this node
    stack_kinds: tuple[str, ...]  # ancestor chain kinds after popping, root first


def _parse(text: str) -> tuple[HeadingNode, list[HeadingEvent]]:
    root = HeadingNode(title="Root", kind="root")
    stack: list[HeadingNode] = [root]
    base_hash = -1
    events: list[HeadingEvent] = []

    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line:
            continue

        for pattern, kind in HEADING_PATTERNS:
            match = pattern.match(line)
            if not match:
                continue

            if kind == "markdown":
                hashes, content = match.groups()
                if base_hash == -1:
                    base_hash = len(hashes)
                level = len(hashes) - base_hash + 1 + 1
                # A shallower hash count than the first heading would pop the
                # root off the stack; clamp so the parser stays total.
                if level < 2:
                    level = 2
            elif kind == "chinese":
                _, content = match.groups()
                level = 2
            elif kind == "chinese_second":
                _, content = match.groups()
                level = 3
            elif kind == "unordered":
                _, content = match.groups()
                if stack[-1].kind != kind:
                    level = len(stack) + 1
                else:
                    level = len(stack)
            else:  # ordered
                _, content = match.groups()
                if stack[-1].kind == "ordered":
                    level = len(stack)
                elif stack[-1].kind == "unordered":
                    if stack[-2].kind == "ordered":
                        level = len(stack) - 1
                    else:
                        level = len(stack)
                else:
                    level = len(stack) + 1

            node = HeadingNode(title=content.strip(), kind=kind)
            depth_before = len(stack)

            while len(stack) >= level:
                stack.pop()

            stack[-1].children.append(node)
            stack.append(node)

            events.append(
                HeadingEvent(
                    line_no=line_no,
                    line=line,
                    kind=kind,
                    level=level,
                    stack_depth=depth_before,
                    stack_kinds=tuple(n.kind for n in stack[:-1]),
                )
            )
            break

    return root, events


def parse_headings(text: str) -> HeadingNode:
    """Parse a document outline; total on arbitrary input, never raises."""
    root, _ = _parse(text)
    return root


@dataclass(frozen=True)
class Violation:
    rule: str
    line_no: int
    excerpt: str

    def to_dict(self) -> dict:
        return {"rule": self.rule, "line_no": self.line_no, "excerpt": self.excerpt}


@dataclass(frozen=True)
class FormatVerdict:
    score: int  # 0, 5 or 10
    violations: tuple[Violation, ...]

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "violations": [v.to_dict() for v in self.violations],
        }


def _tree_depth(node: HeadingNode) -> int:
    if not node.children:
        return 0
    return 1 + max(_tree_depth(child) for child in node.children)


def _paragraph_blocks(text: str) -> list[list[tuple[int, str]]]:
    """Blank-line separated blocks of (line_no, stripped line)."""
    blocks: list[list[tuple[int, str]]] = []
    current: list[tuple[int, str]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line:
            current.append((line_no, line))
        elif current:
            blocks.append(current)
            current = []
    if current:
        blocks.append(current)
    return blocks


def _matches_any_pattern(line: str) -> bool:
    return any(pattern.match(line) for pattern, _ in HEADING_PATTERNS)


def _hierarchy_violations(events: list[HeadingEvent]) -> list[Violation]:
    violations = []
    for event in events:
        if event.level > event.stack_depth + 1:
            violations.append(
                Violation(rule="F1", line_no=event.line_no, excerpt=event.line)
            )
        elif event.kind == "chinese_second" and "chinese" not in event.stack_kinds:
            violations.append(
                Violation(rule="F1", line_no=event.line_no, excerpt=event.line)
            )
    return violations


def _stray_list_violations(text: str) -> list[Violation]:
    """A lone dash item wedged between runs of plain prose paragraphs."""
    blocks = _paragraph_blocks(text)

    def is_plain(block) -> bool:
        return all(not _matches_any_pattern(line) for _, line in block)

    def is_single_unordered(block) -> bool:
        return len(block) == 1 and HEADING_PATTERNS[4][0].match(block[0][1]) is not None

    violations = []
    for i, block in enumerate(blocks):
        if not is_single_unordered(block):
            continue
        above = blocks[max(0, i - 2) : i]
        below = blocks[i + 1 : i + 3]
        if len(above) == 2 and len(below) == 2 and all(
            is_plain(b) for b in above + below
        ):
            line_no, line = block[0]
            violations.append(Violation(rule="F2", line_no=line_no, excerpt=line))
    return violations


def check_formatting(text: str) -> FormatVerdict:
    """Score a document 0 (hard violation), 5 (flat or no titling) or 10."""
    root, events = _parse(text)

    violations = _hierarchy_violations(events) + _stray_list_violations(text)
    violations.sort(key=lambda v: (v.line_no, v.rule))
    if violations:
        return FormatVerdict(score=0, violations=tuple(violations))

    if not root.children or _tree_depth(root) <= 1:
        return FormatVerdict(score=5, violations=())
    return FormatVerdict(score=10, violations=())
