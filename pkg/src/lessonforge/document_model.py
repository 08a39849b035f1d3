"""Canonical source-of-truth document model and plain-text ingestion.

Input format: UTF-8 text with ``#``-style heading markers (depth = number
of hashes). Body lines between headings are grouped into blocks at blank
lines; block kind is sniffed from the first line of the run:

* lines starting with ``- `` or ``* `` ............ ``list``
* first line matching ``Figure[ n]:`` (case-insensitive) ``figure_caption``
* lines starting with ``|`` ....................... ``table_text``
* anything else ................................... ``paragraph``

Documents are immutable after construction. Ids are content-hash derived,
so identical inputs yield identical ids (golden-file stability).
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator

from .config import UNDERGRADUATE, UNDERGRADUATE_NUMERIC_GRADE
from .errors import EmptyInput, EmptySection, InvalidProfile, MalformedHeadingNesting

_HEADING_RE = re.compile(r"^(?P<marks>#{1,6})\s+(?P<heading>\S.*)$")
_FIGURE_RE = re.compile(r"^(figure|fig\.?)\s*\d*\s*:", re.IGNORECASE)


class BlockKind(str, Enum):
    paragraph = "paragraph"
    list = "list"
    figure_caption = "figure_caption"
    table_text = "table_text"


@dataclass(frozen=True)
class Block:
    """One contiguous run of body text within a section."""

    id: str
    kind: BlockKind
    text: str
    char_length: int

    def __post_init__(self) -> None:
        if not self.text:
            raise EmptyInput("block text must be non-empty")
        if self.char_length != len(self.text):
            raise EmptyInput("char_length must equal len(text)")


@dataclass(frozen=True)
class Section:
    """A heading plus its own blocks. Nesting is encoded by depth order."""

    id: str
    heading: str
    depth: int
    blocks: tuple[Block, ...]


@dataclass(frozen=True)
class SourceDocument:
    """Flat, reading-ordered section list; nesting implied by depths."""

    id: str
    title: str
    sections: tuple[Section, ...]
    source_uri: str | None = None

    def section_by_id(self, section_id: str) -> Section:
        for s in self.sections:
            if s.id == section_id:
                return s
        raise KeyError(section_id)

    def block_by_id(self, block_id: str) -> tuple[Section, Block]:
        for s in self.sections:
            for b in s.blocks:
                if b.id == block_id:
                    return s, b
        raise KeyError(block_id)

    def iter_blocks(self) -> Iterator[tuple[Section, Block]]:
        for s in self.sections:
            for b in s.blocks:
                yield s, b

    def top_level_sections(self) -> tuple[Section, ...]:
        return tuple(s for s in self.sections if s.depth == 1)

    def total_chars(self) -> int:
        return sum(b.char_length for _, b in self.iter_blocks())


@dataclass(frozen=True)
class LearnerProfile:
    """Grade level (1-12 or 'undergraduate') plus one catalog interest."""

    grade_level: int | str
    interest: str

    def validate(self, interest_catalog: tuple[str, ...]) -> None:
        numeric_grade(self.grade_level)  # raises on out-of-range
        if self.interest not in interest_catalog:
            raise InvalidProfile(
                f"interest {self.interest!r} not in catalog {sorted(interest_catalog)}"
            )

    def key(self) -> str:
        """Stable slug used for bundle directory names."""
        return f"grade{self.grade_level}-{self.interest}"


def numeric_grade(grade_level: int | str) -> int:
    """Map a profile grade to its numeric value (undergraduate -> 13)."""
    if grade_level == UNDERGRADUATE:
        return UNDERGRADUATE_NUMERIC_GRADE
    if isinstance(grade_level, bool) or not isinstance(grade_level, int):
        raise InvalidProfile(f"grade_level must be 1-12 or {UNDERGRADUATE!r}")
    if not 1 <= grade_level <= 12:
        raise InvalidProfile(f"grade_level {grade_level} outside supported range 1-12")
    return grade_level


def _short_hash(*parts: str) -> str:
    return hashlib.sha256("|".join(parts).encode("utf-8")).hexdigest()[:10]


def _sniff_kind(lines: list[str]) -> BlockKind:
    if all(ln.lstrip().startswith(("- ", "* ")) for ln in lines):
        return BlockKind.list
    if _FIGURE_RE.match(lines[0].strip()):
        return BlockKind.figure_caption
    if all(ln.lstrip().startswith("|") for ln in lines):
        return BlockKind.table_text
    return BlockKind.paragraph


@dataclass
class _OpenSection:
    heading: str
    depth: int
    ordinal: int
    line: int
    blocks: list[Block] = field(default_factory=list)


def ingest(raw_text: str, source_uri: str | None = None) -> SourceDocument:
    """Parse heading-marked plain text into a :class:`SourceDocument`.

    Raises:
        EmptyInput: input is empty after trimming.
        MalformedHeadingNesting: depth jump > 1, or body/heading text before
            the first depth-1 heading (reported with its line number).
        EmptySection: leaf section without any block.
    """
    if not raw_text or not raw_text.strip():
        raise EmptyInput("document text is empty")

    open_sections: list[_OpenSection] = []
    finished: list[_OpenSection] = []
    has_children: dict[int, bool] = {}
    pending: list[str] = []
    pending_line = 0
    ordinal = 0

    def close_pending() -> None:
        nonlocal pending
        if not pending:
            return
        text = "\n".join(pending)
        sec = open_sections[-1]
        sec.blocks.append(
            Block(
                id="b-" + _short_hash(str(sec.ordinal), str(len(sec.blocks)), text),
                kind=_sniff_kind(pending),
                text=text,
                char_length=len(text),
            )
        )
        pending = []

    def close_sections(down_to_depth: int) -> None:
        while open_sections and open_sections[-1].depth >= down_to_depth:
            finished.append(open_sections.pop())

    for lineno, raw_line in enumerate(raw_text.splitlines(), start=1):
        line = raw_line.rstrip()
        m = _HEADING_RE.match(line)
        if m:
            depth = len(m.group("marks"))
            current_depth = open_sections[-1].depth if open_sections else 0
            if depth > current_depth + 1:
                raise MalformedHeadingNesting(
                    f"heading depth jumps from {current_depth} to {depth}", lineno
                )
            close_pending()
            if depth <= current_depth:
                close_sections(depth)
            if open_sections:
                has_children[open_sections[-1].ordinal] = True
            open_sections.append(
                _OpenSection(m.group("heading").strip(), depth, ordinal, lineno)
            )
            ordinal += 1
            continue
        if not line:
            if open_sections:
                close_pending()
            continue
        if not open_sections:
            raise MalformedHeadingNesting("body text before the first heading", lineno)
        pending.append(line)

    close_pending()
    close_sections(1)
    if not finished:
        raise EmptyInput("document has no sections")

    for sec in finished:
        if not sec.blocks and not has_children.get(sec.ordinal, False):
            raise EmptySection(f"section {sec.heading!r} has no content", sec.line)

    ordered = sorted(finished, key=lambda s: s.ordinal)
    sections = tuple(
        Section(
            id="s-" + _short_hash(str(s.ordinal), str(s.depth), s.heading),
            heading=s.heading,
            depth=s.depth,
            blocks=tuple(s.blocks),
        )
        for s in ordered
    )
    body = "\n".join(
        "#" * s.depth + s.heading + "\n" + "\n".join(b.text for b in s.blocks)
        for s in sections
    )
    return SourceDocument(
        id="doc-" + hashlib.sha256(body.encode("utf-8")).hexdigest()[:12],
        title=sections[0].heading,
        sections=sections,
        source_uri=source_uri,
    )


def flatten_text(doc: SourceDocument) -> str:
    """Headings and block texts in reading order, blank-line separated.

    Heading markers are dropped; this is the readability-measurement and
    display form, not a round-trip form (see :func:`to_source_text`).
    """
    parts: list[str] = []
    for s in doc.sections:
        parts.append(s.heading)
        parts.extend(b.text for b in s.blocks)
    return "\n\n".join(parts)


def to_source_text(doc: SourceDocument) -> str:
    """Marker-preserving serialization; re-ingesting yields an identical structure."""
    parts: list[str] = []
    for s in doc.sections:
        parts.append("#" * s.depth + " " + s.heading)
        parts.extend(b.text for b in s.blocks)
    return "\n\n".join(parts)


def document_to_dict(doc: SourceDocument) -> dict:
    """Canonical JSON object form (stable key order applied at dump time)."""
    return {
        "id": doc.id,
        "title": doc.title,
        "source_uri": doc.source_uri,
        "sections": [
            {
                "id": s.id,
                "heading": s.heading,
                "depth": s.depth,
                "blocks": [
                    {
                        "id": b.id,
                        "kind": b.kind.value,
                        "text": b.text,
                        "char_length": b.char_length,
                    }
                    for b in s.blocks
                ],
            }
            for s in doc.sections
        ],
    }


def document_from_dict(data: dict) -> SourceDocument:
    sections = tuple(
        Section(
            id=s["id"],
            heading=s["heading"],
            depth=s["depth"],
            blocks=tuple(
                Block(
                    id=b["id"],
                    kind=BlockKind(b["kind"]),
                    text=b["text"],
                    char_length=b["char_length"],
                )
                for b in s["blocks"]
            ),
        )
        for s in data["sections"]
    )
    return SourceDocument(
        id=data["id"],
        title=data["title"],
        sections=sections,
        source_uri=data.get("source_uri"),
    )
