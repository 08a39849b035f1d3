"""Immersive view assembly: full personalized text plus per-section add-ons.

Add-ons (timelines, mnemonics, illustrations) and assessment anchors are
placed after their section in a fixed order, so assembly is deterministic:
identical inputs serialize byte-identically.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Protocol

from .config import PipelineConfig
from .errors import DanglingAnchor, NotAPermutation, ValidationFailure
from .gateway import Gateway, GenerationRequest, TaskTag
from .personalization import PersonalizedDocument

ADDON_ORDER = ("timeline", "mnemonic", "illustration")
PENDING_IMAGE = "pending"


@dataclass(frozen=True)
class TimelineItem:
    label: str
    description: str

    def to_dict(self) -> dict:
        return {"label": self.label, "description": self.description}


@dataclass(frozen=True)
class Timeline:
    """Ordered sequence whose item order is the canonical correct answer."""

    items: tuple[TimelineItem, ...]
    anchor_section: str
    exercise_enabled: bool = True

    def __post_init__(self) -> None:
        if len(self.items) < 3:
            raise ValidationFailure("timeline needs at least 3 items")
        labels = [i.label for i in self.items]
        if len(set(labels)) != len(labels):
            raise ValidationFailure("timeline labels must be unique")

    @property
    def id(self) -> str:
        key = self.anchor_section + "|" + "|".join(i.label for i in self.items)
        return "tl-" + hashlib.sha256(key.encode("utf-8")).hexdigest()[:10]

    def to_dict(self) -> dict:
        return {
            "kind": "timeline",
            "id": self.id,
            "items": [i.to_dict() for i in self.items],
            "anchor_section": self.anchor_section,
            "exercise_enabled": self.exercise_enabled,
        }


@dataclass(frozen=True)
class Mnemonic:
    items: tuple[str, ...]
    sentence: str
    anchor_section: str

    def to_dict(self) -> dict:
        return {
            "kind": "mnemonic",
            "items": list(self.items),
            "sentence": self.sentence,
            "anchor_section": self.anchor_section,
        }


@dataclass(frozen=True)
class IllustrationSpec:
    anchor_block: str
    brief: str
    caption: str
    image_ref: str = PENDING_IMAGE

    def to_dict(self) -> dict:
        return {
            "kind": "illustration",
            "anchor_block": self.anchor_block,
            "brief": self.brief,
            "caption": self.caption,
            "image_ref": self.image_ref,
        }


@dataclass(frozen=True)
class ImmersiveDocument:
    """The serving contract: personalized text interleaved with add-ons and anchors."""

    pdoc: PersonalizedDocument
    addons: dict  # section_id -> ordered list of addon objects
    assessment_anchors: dict  # section_id -> {"embedded": [...question slots...], "quiz": slot}

    def to_dict(self, redact: bool = False) -> dict:
        sections = []
        for s in self.pdoc.base.sections:
            anchors = self.assessment_anchors.get(s.id, {"embedded": [], "quiz": None})
            quiz = anchors.get("quiz")
            sections.append(
                {
                    "id": s.id,
                    "addons": [a.to_dict() for a in self.addons.get(s.id, [])],
                    "assessment_anchors": {
                        "embedded": [q.to_dict(redact=redact) for q in anchors.get("embedded", [])],
                        "quiz": quiz.to_dict(redact=redact) if quiz is not None else None,
                    },
                }
            )
        return {"pdoc": self.pdoc.to_dict(), "sections": sections}


# --- timelines ---------------------------------------------------------------


def detect_sequences(
    pdoc: PersonalizedDocument, gateway: Gateway, cfg: PipelineConfig, seed: int = 0
) -> list[Timeline]:
    """Scan each section for orderable sequences; ungrounded candidates are dropped."""
    timelines: list[Timeline] = []
    for i, section in enumerate(pdoc.base.sections):
        if not section.blocks:
            continue
        section_text = pdoc.final_section_text(section.id)
        request = GenerationRequest(
            task_tag=TaskTag.timeline,
            context_parts=(
                ("task", "Find sequences in this section worth showing as an ordered timeline."),
                ("section_heading", section.heading),
                ("section_text", section_text),
            ),
            seed=seed + i,
        )
        payload = gateway.generate(request).payload
        folded = section_text.casefold()
        kept = 0
        for cand in payload["timelines"]:
            if kept >= cfg.max_addons_per_kind:
                break
            items = cand["items"]
            labels = [it["label"] for it in items]
            if len(items) < 3:
                continue
            if len({l.casefold() for l in labels}) != len(labels):
                continue
            if not all(l.casefold() in folded for l in labels):
                continue
            timelines.append(
                Timeline(
                    items=tuple(
                        TimelineItem(it["label"], it.get("description", "")) for it in items
                    ),
                    anchor_section=section.id,
                    exercise_enabled=bool(cand.get("exercise_enabled", True)),
                )
            )
            kept += 1
    return timelines


def grade_timeline_submission(timeline: Timeline, submitted_order: list[str]) -> float:
    """Exact-position score: fraction of labels placed in their canonical slot."""
    canonical = [i.label for i in timeline.items]
    if sorted(submitted_order) != sorted(canonical):
        raise NotAPermutation(
            f"submission must be a permutation of {canonical}, got {submitted_order}"
        )
    hits = sum(1 for got, want in zip(submitted_order, canonical) if got == want)
    return hits / len(canonical)


# --- mnemonics ---------------------------------------------------------------


def validate_mnemonic(items: list[str], sentence: str) -> bool:
    """First-letter rule: word i starts with the first letter of item i, case-insensitive."""
    words = sentence.split()
    if len(words) < len(items):
        return False
    for item, word in zip(items, words):
        if not item or not word:
            return False
        if item[0].casefold() != word[0].casefold():
            return False
    return True


def generate_mnemonic(
    facts: list[str],
    gateway: Gateway,
    cfg: PipelineConfig,
    anchor_section: str = "",
    seed: int = 0,
) -> Mnemonic:
    """Memory sentence for 2-10 key terms; the letter rule is enforced by retry."""
    if not 2 <= len(facts) <= 10:
        raise ValidationFailure(f"mnemonic needs 2-10 items, got {len(facts)}")

    def check(payload) -> list[str]:
        if not validate_mnemonic(facts, payload["sentence"]):
            return [
                "sentence must have one word per item, each starting with the item's first letter"
            ]
        return []

    request = GenerationRequest(
        task_tag=TaskTag.mnemonic,
        context_parts=(
            (
                "task",
                "Write a coherent sentence whose word initials match the items in order, "
                "with a close semantic tie to the material.",
            ),
            ("items", json.dumps(facts, ensure_ascii=False)),
        ),
        seed=seed,
    )
    response = gateway.generate(request, extra_validator=check)
    return Mnemonic(
        items=tuple(facts), sentence=response.payload["sentence"], anchor_section=anchor_section
    )


# --- illustrations -------------------------------------------------------------


class ImageProvider(Protocol):
    def render(self, brief: str, seed: int) -> str:
        """Return an opaque image handle; raise on failure."""
        ...


class MockImageProvider:
    """Deterministic handles; can be told to fail for degradation tests."""

    def __init__(self, fail: bool = False):
        self.fail = fail

    def render(self, brief: str, seed: int) -> str:
        if self.fail:
            raise RuntimeError("image provider down")
        digest = hashlib.sha256(f"{seed}:{brief}".encode("utf-8")).hexdigest()[:12]
        return f"img-{digest}"


def plan_illustrations(
    pdoc: PersonalizedDocument,
    gateway: Gateway,
    cfg: PipelineConfig,
    image_provider: ImageProvider | None = None,
    seed: int = 0,
) -> list[IllustrationSpec]:
    """Pick illustration-worthy blocks, then resolve images (failures leave 'pending')."""
    block_ids = {b.id for _, b in pdoc.base.iter_blocks()}

    def check(payload) -> list[str]:
        unknown = [s["block_id"] for s in payload["illustrations"] if s["block_id"] not in block_ids]
        return [f"unknown anchor blocks {unknown}"] if unknown else []

    sections_json = json.dumps(
        {
            "sections": [
                {
                    "id": s.id,
                    "heading": s.heading,
                    "blocks": [
                        {"id": b.id, "kind": b.kind.value, "text": pdoc.final_block_text(b.id)}
                        for b in s.blocks
                    ],
                }
                for s in pdoc.base.sections
            ]
        },
        ensure_ascii=False,
    )
    request = GenerationRequest(
        task_tag=TaskTag.illustration_brief,
        context_parts=(
            ("task", "Choose the parts of the material most worth a simple explanatory image."),
            ("interest", pdoc.profile.interest),
            ("document", sections_json),
        ),
        seed=seed,
    )
    payload = gateway.generate(request, extra_validator=check).payload

    per_section: dict[str, int] = {}
    specs: list[IllustrationSpec] = []
    for raw in payload["illustrations"]:
        section, _ = pdoc.base.block_by_id(raw["block_id"])
        if per_section.get(section.id, 0) >= cfg.max_addons_per_kind:
            continue
        per_section[section.id] = per_section.get(section.id, 0) + 1
        image_ref = PENDING_IMAGE
        if image_provider is not None:
            try:
                image_ref = image_provider.render(raw["brief"], seed)
            except Exception:
                image_ref = PENDING_IMAGE  # non-fatal: document still assembles
        specs.append(
            IllustrationSpec(
                anchor_block=raw["block_id"],
                brief=raw["brief"],
                caption=raw.get("caption", ""),
                image_ref=image_ref,
            )
        )
    return specs


# --- assembly ---------------------------------------------------------------------


def assemble_immersive(
    pdoc: PersonalizedDocument,
    timelines: list[Timeline] | None = None,
    mnemonics: list[Mnemonic] | None = None,
    illustrations: list[IllustrationSpec] | None = None,
    embedded_questions: dict | None = None,
    quizzes: dict | None = None,
) -> ImmersiveDocument:
    """Deterministic placement: per section — timelines, mnemonics, illustrations,
    then embedded-question slots and the quiz slot.

    Raises:
        DanglingAnchor: any add-on or assessment references an unknown anchor.
    """
    section_ids = [s.id for s in pdoc.base.sections]
    block_to_section = {b.id: s.id for s, b in pdoc.base.iter_blocks()}

    addons: dict[str, list] = {sid: [] for sid in section_ids}
    for tl in timelines or []:
        if tl.anchor_section not in addons:
            raise DanglingAnchor(f"timeline anchored to unknown section {tl.anchor_section!r}")
        addons[tl.anchor_section].append(tl)
    for mn in mnemonics or []:
        if mn.anchor_section not in addons:
            raise DanglingAnchor(f"mnemonic anchored to unknown section {mn.anchor_section!r}")
        addons[mn.anchor_section].append(mn)
    for il in illustrations or []:
        if il.anchor_block not in block_to_section:
            raise DanglingAnchor(f"illustration anchored to unknown block {il.anchor_block!r}")
        addons[block_to_section[il.anchor_block]].append(il)

    order = {Timeline: 0, Mnemonic: 1, IllustrationSpec: 2}
    for sid in section_ids:
        addons[sid].sort(key=lambda a: order[type(a)])

    anchors: dict[str, dict] = {}
    embedded_questions = embedded_questions or {}
    quizzes = quizzes or {}
    for sid, questions in embedded_questions.items():
        if sid not in addons:
            raise DanglingAnchor(f"embedded questions anchored to unknown section {sid!r}")
    for sid in quizzes:
        if sid not in addons:
            raise DanglingAnchor(f"quiz anchored to unknown section {sid!r}")
    for sid in section_ids:
        anchors[sid] = {
            "embedded": list(embedded_questions.get(sid, [])),
            "quiz": quizzes.get(sid),
        }
    return ImmersiveDocument(pdoc=pdoc, addons=addons, assessment_anchors=anchors)
