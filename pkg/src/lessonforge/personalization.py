"""Stage 1: grade-level releveling, then focused interest rewriting.

Releveling regenerates every section via the gateway and accepts the
candidate whose whole-document readability lands within tolerance of the
target grade while keeping a cheap coverage proxy (every section heading
shares a content word with its releveled text). Interest rewriting then
replaces only provider-selected segments, recording provenance spans so
the UI can highlight exactly what was personalized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .config import PipelineConfig
from .document_model import (
    Block,
    LearnerProfile,
    Section,
    SourceDocument,
    document_from_dict,
    document_to_dict,
    numeric_grade,
)
from .errors import ValidationFailure
from .gateway import Gateway, GenerationRequest, TaskTag
from .readability import readability

_COVERAGE_STOPWORDS = frozenset(
    "the a an and or but of to in on for with by is are was were how what "
    "when why where which who this that these those it its".split()
)


@dataclass(frozen=True)
class RelevelReport:
    target: int | str
    achieved_fkg: float
    attempts: int
    accepted: bool

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "achieved_fkg": self.achieved_fkg,
            "attempts": self.attempts,
            "accepted": self.accepted,
        }


@dataclass(frozen=True)
class PersonalizationSpan:
    """A replaced segment; char_range indexes the releveled block text."""

    block_id: str
    char_range: tuple[int, int]
    original_text: str
    personalized_text: str
    interest: str

    def to_dict(self) -> dict:
        return {
            "block_id": self.block_id,
            "char_range": list(self.char_range),
            "original_text": self.original_text,
            "personalized_text": self.personalized_text,
            "interest": self.interest,
        }


@dataclass(frozen=True)
class PersonalizedDocument:
    """Releveled structure plus provenance spans; final text is derived."""

    base: SourceDocument
    spans: tuple[PersonalizationSpan, ...]
    profile: LearnerProfile
    relevel_report: RelevelReport

    def __post_init__(self) -> None:
        for span in self.spans:
            _, block = self.base.block_by_id(span.block_id)
            start, end = span.char_range
            if not (0 <= start < end <= len(block.text)):
                raise ValidationFailure(f"span range {span.char_range} outside block bounds")
            if block.text[start:end] != span.original_text:
                raise ValidationFailure("span original_text does not match releveled text")

    def spans_for_block(self, block_id: str) -> list[PersonalizationSpan]:
        return sorted(
            (s for s in self.spans if s.block_id == block_id),
            key=lambda s: s.char_range[0],
        )

    def final_block_text(self, block_id: str) -> str:
        _, block = self.base.block_by_id(block_id)
        text = block.text
        for span in reversed(self.spans_for_block(block_id)):
            start, end = span.char_range
            text = text[:start] + span.personalized_text + text[end:]
        return text

    def highlight_ranges(self, block_id: str) -> list[tuple[int, int]]:
        """Span positions in final-text coordinates, for UI highlighting."""
        ranges = []
        delta = 0
        for span in self.spans_for_block(block_id):
            start, end = span.char_range
            new_start = start + delta
            new_end = new_start + len(span.personalized_text)
            ranges.append((new_start, new_end))
            delta += len(span.personalized_text) - (end - start)
        return ranges

    def final_section_text(self, section_id: str) -> str:
        section = self.base.section_by_id(section_id)
        return "\n\n".join(self.final_block_text(b.id) for b in section.blocks)

    def final_flat_text(self) -> str:
        parts: list[str] = []
        for section in self.base.sections:
            parts.append(section.heading)
            parts.extend(self.final_block_text(b.id) for b in section.blocks)
        return "\n\n".join(parts)

    def releveled_flat_text(self) -> str:
        from .document_model import flatten_text

        return flatten_text(self.base)

    def to_dict(self) -> dict:
        return {
            "base": document_to_dict(self.base),
            "spans": [s.to_dict() for s in self.spans],
            "profile": {"grade_level": self.profile.grade_level, "interest": self.profile.interest},
            "relevel_report": self.relevel_report.to_dict(),
            "final": {
                "sections": [
                    {
                        "id": s.id,
                        "heading": s.heading,
                        "depth": s.depth,
                        "blocks": [
                            {
                                "id": b.id,
                                "kind": b.kind.value,
                                "text": self.final_block_text(b.id),
                                "highlights": [list(r) for r in self.highlight_ranges(b.id)],
                            }
                            for b in s.blocks
                        ],
                    }
                    for s in self.base.sections
                ]
            },
        }


def personalized_document_from_dict(data: dict) -> PersonalizedDocument:
    base = document_from_dict(data["base"])
    spans = tuple(
        PersonalizationSpan(
            block_id=s["block_id"],
            char_range=tuple(s["char_range"]),
            original_text=s["original_text"],
            personalized_text=s["personalized_text"],
            interest=s["interest"],
        )
        for s in data["spans"]
    )
    profile = LearnerProfile(
        grade_level=data["profile"]["grade_level"], interest=data["profile"]["interest"]
    )
    rr = data["relevel_report"]
    report = RelevelReport(rr["target"], rr["achieved_fkg"], rr["attempts"], rr["accepted"])
    return PersonalizedDocument(base=base, spans=spans, profile=profile, relevel_report=report)


def _content_word_set(text: str) -> set[str]:
    return {
        w
        for w in ("".join(c if c.isalnum() else " " for c in text.lower())).split()
        if len(w) >= 3 and w not in _COVERAGE_STOPWORDS
    }


def heading_coverage_ok(doc: SourceDocument, releveled: dict[str, str]) -> bool:
    """Every heading with content words shares at least one with its section."""
    for section in doc.sections:
        heading_words = _content_word_set(section.heading)
        if not heading_words:
            continue
        section_words: set[str] = set()
        for block in section.blocks:
            section_words |= _content_word_set(releveled[block.id])
        if section.blocks and not (heading_words & section_words):
            return False
    return True


def _relevel_section_request(
    section: Section, target_numeric: int, seed: int
) -> GenerationRequest:
    blocks_json = json.dumps(
        [{"id": b.id, "text": b.text} for b in section.blocks], ensure_ascii=False
    )
    return GenerationRequest(
        task_tag=TaskTag.relevel,
        context_parts=(
            ("task", "Rewrite the section so it reads at the target school grade level."),
            ("target_grade", str(target_numeric)),
            ("section_heading", section.heading),
            ("section_blocks", blocks_json),
        ),
        seed=seed,
    )


def _relevel_validator(section: Section):
    expected = {b.id for b in section.blocks}

    def check(payload) -> list[str]:
        got = [b["block_id"] for b in payload["blocks"]]
        if sorted(got) != sorted(expected):
            return [f"must return exactly the block ids {sorted(expected)}"]
        return []

    return check


def _candidate_fkg(doc: SourceDocument, releveled: dict[str, str]) -> float:
    parts: list[str] = []
    for section in doc.sections:
        parts.append(section.heading)
        parts.extend(releveled[b.id] for b in section.blocks)
    return readability("\n\n".join(parts)).fkg


def relevel(
    doc: SourceDocument,
    target: int | str,
    gateway: Gateway,
    cfg: PipelineConfig,
    seed: int = 0,
) -> tuple[dict[str, str], RelevelReport]:
    """Generate releveled text per block; best-effort if tolerance is never met.

    Returns the winning candidate (block_id -> text) and the report. A miss
    is not an error: accepted=False with the closest candidate kept.
    """
    target_numeric = numeric_grade(target)
    candidates: list[tuple[bool, float, int, dict[str, str]]] = []
    for attempt in range(1, cfg.max_relevel_attempts + 1):
        releveled: dict[str, str] = {}
        for section in doc.sections:
            if not section.blocks:
                continue
            request = _relevel_section_request(section, target_numeric, seed + attempt - 1)
            response = gateway.generate(request, extra_validator=_relevel_validator(section))
            for blk in response.payload["blocks"]:
                releveled[blk["block_id"]] = blk["text"]
        fkg = _candidate_fkg(doc, releveled)
        coverage = heading_coverage_ok(doc, releveled)
        within = abs(fkg - target_numeric) <= cfg.relevel_tolerance
        if within and coverage:
            return releveled, RelevelReport(target, fkg, attempt, accepted=True)
        candidates.append((coverage, abs(fkg - target_numeric), attempt, releveled))
    # best candidate: coverage-passing first, then closest grade, then earliest
    best = sorted(candidates, key=lambda c: (not c[0], c[1], c[2]))[0]
    fkg = _candidate_fkg(doc, best[3])
    return best[3], RelevelReport(target, fkg, cfg.max_relevel_attempts, accepted=False)


def _segments_validator(doc: SourceDocument, releveled: dict[str, str], budget: int):
    def check(payload) -> list[str]:
        out: list[str] = []
        by_block: dict[str, list[tuple[int, int]]] = {}
        total = 0
        for i, seg in enumerate(payload["segments"]):
            bid = seg["block_id"]
            if bid not in releveled:
                out.append(f"segments[{i}]: unknown block {bid!r}")
                continue
            start, end = seg["start"], seg["end"]
            if end > len(releveled[bid]):
                out.append(f"segments[{i}]: range beyond block length {len(releveled[bid])}")
                continue
            by_block.setdefault(bid, []).append((start, end))
            total += end - start
        for bid, ranges in by_block.items():
            ranges.sort()
            for (s1, e1), (s2, _) in zip(ranges, ranges[1:]):
                if s2 < e1:
                    out.append(f"overlapping segments in block {bid}")
                    break
        if total > budget:
            out.append(f"segments cover {total} chars, over the budget of {budget}")
        return out

    return check


def select_personalizable_segments(
    doc: SourceDocument,
    releveled: dict[str, str],
    interest: str,
    gateway: Gateway,
    cfg: PipelineConfig,
    seed: int = 0,
) -> list[dict]:
    """Ask the provider for rewrite-worthy segments; enforce range and budget rules."""
    total_chars = sum(len(t) for t in releveled.values())
    budget = int(cfg.max_fraction * total_chars)
    blocks_json = json.dumps(
        [{"id": b.id, "text": releveled[b.id]} for _, b in doc.iter_blocks()],
        ensure_ascii=False,
    )
    request = GenerationRequest(
        task_tag=TaskTag.select_segments,
        context_parts=(
            ("task", "Pick the text segments most worth rewriting around the learner's interest."),
            ("interest", interest),
            ("blocks", blocks_json),
            ("max_chars", str(budget)),
        ),
        seed=seed,
    )
    response = gateway.generate(
        request, extra_validator=_segments_validator(doc, releveled, budget)
    )
    block_order = {b.id: i for i, (_, b) in enumerate(doc.iter_blocks())}
    return sorted(
        response.payload["segments"],
        key=lambda s: (block_order[s["block_id"]], s["start"]),
    )


def _rebuild_with_texts(doc: SourceDocument, texts: dict[str, str]) -> SourceDocument:
    sections = tuple(
        Section(
            id=s.id,
            heading=s.heading,
            depth=s.depth,
            blocks=tuple(
                Block(id=b.id, kind=b.kind, text=texts[b.id], char_length=len(texts[b.id]))
                for b in s.blocks
            ),
        )
        for s in doc.sections
    )
    return SourceDocument(id=doc.id, title=doc.title, sections=sections, source_uri=doc.source_uri)


def personalize(
    doc: SourceDocument,
    profile: LearnerProfile,
    gateway: Gateway,
    cfg: PipelineConfig,
    seed: int = 0,
) -> PersonalizedDocument:
    """Relevel, select segments, rewrite each one; untouched text stays byte-identical."""
    profile.validate(cfg.interest_catalog)
    releveled, report = relevel(doc, profile.grade_level, gateway, cfg, seed=seed)
    segments = select_personalizable_segments(
        doc, releveled, profile.interest, gateway, cfg, seed=seed + 1
    )
    spans: list[PersonalizationSpan] = []
    for i, seg in enumerate(segments):
        original = releveled[seg["block_id"]][seg["start"] : seg["end"]]
        request = GenerationRequest(
            task_tag=TaskTag.rewrite_segment,
            context_parts=(
                ("task", "Rewrite the segment so it speaks to the learner's interest."),
                ("interest", profile.interest),
                ("segment_text", original),
            ),
            seed=seed + 2 + i,
        )
        response = gateway.generate(request)
        spans.append(
            PersonalizationSpan(
                block_id=seg["block_id"],
                char_range=(seg["start"], seg["end"]),
                original_text=original,
                personalized_text=response.payload["text"],
                interest=profile.interest,
            )
        )
    return PersonalizedDocument(
        base=_rebuild_with_texts(doc, releveled),
        spans=tuple(spans),
        profile=profile,
        relevel_report=report,
    )
