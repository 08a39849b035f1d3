"""Stage 2 views over the personalized text.

Four mutually independent generators consume a PersonalizedDocument: a
slide deck (optional narration), a two-persona dialogue lesson with a
synchronized concept graph, and a collapsible mind map. The dialogue's
student persona receives conversation history only — never material text —
and that separation is asserted before every student request.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .config import PipelineConfig
from .errors import IsolationViolation, UnknownNode, ValidationFailure
from .gateway import (
    Gateway,
    GenerationRequest,
    Persona,
    TaskTag,
    assert_persona_isolation,
    text_windows,
)
from .personalization import PersonalizedDocument
from .readability import split_words

ISOLATION_WINDOW = 20


# --- slide deck ---------------------------------------------------------------


@dataclass(frozen=True)
class Slide:
    title: str
    bullet_points: tuple[str, ...]
    source_section_refs: tuple[str, ...]
    visual_brief: str | None = None
    opener_question: str | None = None
    activity: str | None = None

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "bullet_points": list(self.bullet_points),
            "source_section_refs": list(self.source_section_refs),
            "visual_brief": self.visual_brief,
            "opener_question": self.opener_question,
            "activity": self.activity,
        }


@dataclass(frozen=True)
class SlideDeck:
    slides: tuple[Slide, ...]
    omissions: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"slides": [s.to_dict() for s in self.slides], "omissions": list(self.omissions)}


@dataclass(frozen=True)
class NarrationSegment:
    slide_index: int
    text: str
    estimated_seconds: float

    def to_dict(self) -> dict:
        return {
            "slide_index": self.slide_index,
            "text": self.text,
            "estimated_seconds": self.estimated_seconds,
        }


@dataclass(frozen=True)
class NarrationTrack:
    segments: tuple[NarrationSegment, ...]

    def to_dict(self) -> dict:
        return {"segments": [s.to_dict() for s in self.segments]}


# --- dialogue lesson ------------------------------------------------------------


@dataclass(frozen=True)
class ConceptNode:
    id: str
    label: str
    summary: str


@dataclass(frozen=True)
class ConceptEdge:
    src: str
    dst: str
    relation_label: str


@dataclass(frozen=True)
class ConceptGraph:
    nodes: tuple[ConceptNode, ...]
    edges: tuple[ConceptEdge, ...]

    def node_ids(self) -> set[str]:
        return {n.id for n in self.nodes}

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n.id, "label": n.label, "summary": n.summary} for n in self.nodes],
            "edges": [
                {"from": e.src, "to": e.dst, "relation_label": e.relation_label}
                for e in self.edges
            ],
        }


@dataclass(frozen=True)
class DialogueTurn:
    speaker: str  # "teacher" | "student"
    text: str
    revealed_concepts: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "speaker": self.speaker,
            "text": self.text,
            "revealed_concepts": list(self.revealed_concepts),
        }


@dataclass(frozen=True)
class DialogueLesson:
    turns: tuple[DialogueTurn, ...]
    concept_graph: ConceptGraph
    termination_reason: str  # "coverage_met" | "max_turns"

    def to_dict(self) -> dict:
        return {
            "turns": [t.to_dict() for t in self.turns],
            "concept_graph": self.concept_graph.to_dict(),
            "termination_reason": self.termination_reason,
        }


# --- mind map -------------------------------------------------------------------


@dataclass(frozen=True)
class MindMapNode:
    id: str
    label: str
    children: tuple["MindMapNode", ...] = ()
    annotation: dict | None = None
    expanded: bool = False

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "label": self.label,
            "children": [c.to_dict() for c in self.children],
            "annotation": self.annotation,
            "expanded": self.expanded,
        }


@dataclass(frozen=True)
class MindMap:
    root: MindMapNode

    def to_dict(self) -> dict:
        return {"root": self.root.to_dict()}

    def find(self, node_id: str) -> MindMapNode | None:
        def walk(node: MindMapNode) -> MindMapNode | None:
            if node.id == node_id:
                return node
            for child in node.children:
                found = walk(child)
                if found is not None:
                    return found
            return None

        return walk(self.root)

    def node_count(self) -> int:
        def count(node: MindMapNode) -> int:
            return 1 + sum(count(c) for c in node.children)

        return count(self.root)


def mindmap_from_dict(data: dict) -> MindMap:
    def parse(node: dict) -> MindMapNode:
        return MindMapNode(
            id=node["id"],
            label=node["label"],
            children=tuple(parse(c) for c in node.get("children", [])),
            annotation=node.get("annotation"),
            expanded=bool(node.get("expanded", False)),
        )

    return MindMap(root=parse(data["root"]))


# --- shared context builders ------------------------------------------------------


def _document_context(pdoc: PersonalizedDocument, include_blocks: bool = False) -> str:
    sections = []
    for s in pdoc.base.sections:
        entry: dict = {
            "id": s.id,
            "heading": s.heading,
            "depth": s.depth,
            "text": pdoc.final_section_text(s.id),
        }
        if include_blocks:
            entry["blocks"] = [
                {"id": b.id, "kind": b.kind.value, "text": pdoc.final_block_text(b.id)}
                for b in s.blocks
            ]
        sections.append(entry)
    return json.dumps({"title": pdoc.base.title, "sections": sections}, ensure_ascii=False)


# --- slides ------------------------------------------------------------------------


def _slides_validator(pdoc: PersonalizedDocument):
    all_ids = {s.id for s in pdoc.base.sections}

    def check(payload) -> list[str]:
        out: list[str] = []
        referenced: set[str] = set()
        for i, slide in enumerate(payload["slides"]):
            for ref in slide["section_refs"]:
                if ref not in all_ids:
                    out.append(f"slides[{i}] references unknown section {ref!r}")
                referenced.add(ref)
        omissions = set(payload.get("omissions", []))
        if omissions - all_ids:
            out.append(f"omissions reference unknown sections {sorted(omissions - all_ids)}")
        if omissions & referenced:
            out.append("omissions must be disjoint from referenced sections")
        missing = all_ids - referenced - omissions
        if missing:
            out.append(f"sections neither covered nor omitted: {sorted(missing)}")
        return out

    return check


def generate_slides(
    pdoc: PersonalizedDocument, gateway: Gateway, cfg: PipelineConfig, seed: int = 0
) -> SlideDeck:
    """Deck covering every section (or explicitly omitting it)."""
    request = GenerationRequest(
        task_tag=TaskTag.slides,
        context_parts=(
            ("task", "Turn the material into a brief class-like slide sequence."),
            ("interest", pdoc.profile.interest),
            ("document", _document_context(pdoc)),
        ),
        params={"max_bullets": cfg.max_bullets},
        seed=seed,
    )
    response = gateway.generate(request, extra_validator=_slides_validator(pdoc))
    slides = tuple(
        Slide(
            title=s["title"],
            bullet_points=tuple(s["bullets"]),
            source_section_refs=tuple(s["section_refs"]),
            visual_brief=s.get("visual_brief"),
            opener_question=s.get("opener_question"),
            activity=s.get("activity"),
        )
        for s in response.payload["slides"]
    )
    return SlideDeck(slides=slides, omissions=tuple(response.payload.get("omissions", [])))


def slides_outline(deck: SlideDeck) -> str:
    """Plain-text outline export for quick inspection."""
    lines: list[str] = []
    for i, slide in enumerate(deck.slides, start=1):
        lines.append(f"Slide {i}: {slide.title}")
        if slide.opener_question:
            lines.append(f"  ? {slide.opener_question}")
        lines.extend(f"  - {b}" for b in slide.bullet_points)
        if slide.activity:
            lines.append(f"  > {slide.activity}")
    return "\n".join(lines)


# --- narration -----------------------------------------------------------------------


def generate_narration(
    deck: SlideDeck, gateway: Gateway, cfg: PipelineConfig, seed: int = 0
) -> NarrationTrack:
    """One narration segment per slide; timing estimated from word count."""
    if not deck.slides:
        raise ValidationFailure("cannot narrate an empty deck")
    deck_json = json.dumps(
        {"slides": [{"title": s.title, "bullets": list(s.bullet_points)} for s in deck.slides]},
        ensure_ascii=False,
    )
    expected = set(range(len(deck.slides)))

    def check(payload) -> list[str]:
        indices = [seg["slide_index"] for seg in payload["segments"]]
        if sorted(indices) != sorted(expected):
            return [f"need exactly one segment per slide index {sorted(expected)}"]
        return []

    request = GenerationRequest(
        task_tag=TaskTag.narration,
        context_parts=(
            ("task", "Narrate each slide like a recorded lesson; do not just read the bullets."),
            ("deck", deck_json),
        ),
        seed=seed,
    )
    response = gateway.generate(request, extra_validator=check)
    segments = tuple(
        NarrationSegment(
            slide_index=seg["slide_index"],
            text=seg["text"],
            estimated_seconds=len(split_words(seg["text"])) / cfg.words_per_second,
        )
        for seg in sorted(response.payload["segments"], key=lambda s: s["slide_index"])
    )
    return NarrationTrack(segments=segments)


# --- dialogue lesson --------------------------------------------------------------------


def derive_concept_graph(
    pdoc: PersonalizedDocument, gateway: Gateway, seed: int = 0
) -> ConceptGraph:
    request = GenerationRequest(
        task_tag=TaskTag.concept_graph,
        context_parts=(
            ("task", "List the key concepts of the material and how they relate."),
            ("document", _document_context(pdoc)),
        ),
        seed=seed,
    )
    payload = gateway.generate(request).payload
    return ConceptGraph(
        nodes=tuple(ConceptNode(n["id"], n["label"], n["summary"]) for n in payload["nodes"]),
        edges=tuple(ConceptEdge(e["from"], e["to"], e["relation"]) for e in payload["edges"]),
    )


def _teacher_validator(unrevealed: set[str]):
    def check(payload) -> list[str]:
        revealed = payload.get("revealed_concepts", [])
        out = []
        if len(set(revealed)) != len(revealed):
            out.append("revealed_concepts repeats a concept")
        unknown = [c for c in revealed if c not in unrevealed]
        if unknown:
            out.append(f"concepts not available for reveal: {unknown}")
        return out

    return check


def generate_dialogue_lesson(
    pdoc: PersonalizedDocument,
    gateway: Gateway,
    cfg: PipelineConfig,
    seed: int = 0,
) -> DialogueLesson:
    """Iterative teacher/student exchange until concept coverage or turn cap.

    The teacher persona sees the material plus history; the student persona
    sees history only, asserted against every material substring of
    ISOLATION_WINDOW characters before the request is issued.
    """
    graph = derive_concept_graph(pdoc, gateway, seed=seed)
    if not graph.nodes:
        raise ValidationFailure("dialogue needs at least one concept")
    source_text = pdoc.final_flat_text()
    forbidden = sorted(
        text_windows(source_text, ISOLATION_WINDOW)
        | text_windows(pdoc.releveled_flat_text(), ISOLATION_WINDOW)
    )
    concepts_json = json.dumps(
        [{"id": n.id, "label": n.label, "summary": n.summary} for n in graph.nodes],
        ensure_ascii=False,
    )

    turns: list[DialogueTurn] = []
    revealed: list[str] = []
    termination = "max_turns"

    def history_json() -> str:
        return json.dumps(
            [{"speaker": t.speaker, "text": t.text} for t in turns], ensure_ascii=False
        )

    while len(turns) < cfg.max_turns:
        unrevealed = [n.id for n in graph.nodes if n.id not in revealed]
        teacher_request = GenerationRequest(
            task_tag=TaskTag.dialogue_turn,
            persona=Persona.teacher,
            context_parts=(
                ("task", "Teach the next piece of the material, then invite the student in."),
                ("source_text", source_text),
                ("concepts", concepts_json),
                ("unrevealed", json.dumps(unrevealed)),
                ("history", history_json()),
            ),
            params={"role": "teacher"},
            seed=seed + 1 + len(turns),
        )
        teacher = gateway.generate(
            teacher_request, extra_validator=_teacher_validator(set(unrevealed))
        )
        new_reveals = tuple(teacher.payload.get("revealed_concepts", []))
        turns.append(DialogueTurn("teacher", teacher.payload["text"], new_reveals))
        revealed.extend(new_reveals)

        if len(turns) < cfg.max_turns:
            student_request = GenerationRequest(
                task_tag=TaskTag.dialogue_turn,
                persona=Persona.student,
                context_parts=(
                    ("task", "React as a curious student using only the conversation so far."),
                    ("history", history_json()),
                ),
                params={"role": "student"},
                seed=seed + 1 + len(turns),
            )
            if not assert_persona_isolation(student_request, forbidden):
                raise IsolationViolation(
                    "student-persona request would carry material text in its context"
                )
            student = gateway.generate(student_request)
            turns.append(DialogueTurn("student", student.payload["text"], ()))

        if len(revealed) / len(graph.nodes) >= cfg.coverage_threshold:
            termination = "coverage_met"
            break

    return DialogueLesson(
        turns=tuple(turns), concept_graph=graph, termination_reason=termination
    )


# --- mind map ------------------------------------------------------------------------------


def _mindmap_validator(pdoc: PersonalizedDocument):
    top = [s.heading for s in pdoc.base.top_level_sections()]

    def check(payload) -> list[str]:
        children = payload["root"].get("children", [])
        labels = [c.get("label") for c in children]
        if labels != top:
            return [f"depth-1 children must mirror the top-level sections {top}, got {labels}"]
        return []

    return check


def generate_mind_map(
    pdoc: PersonalizedDocument, gateway: Gateway, cfg: PipelineConfig, seed: int = 0
) -> MindMap:
    """Hierarchical map; root expanded, everything else collapsed initially."""
    request = GenerationRequest(
        task_tag=TaskTag.mindmap,
        context_parts=(
            ("task", "Organize the material as a hierarchy; annotate leaves from the source."),
            ("document", _document_context(pdoc, include_blocks=True)),
        ),
        seed=seed,
    )
    response = gateway.generate(request, extra_validator=_mindmap_validator(pdoc))

    def build(node: dict, path: str, depth: int) -> MindMapNode:
        children = tuple(
            build(child, f"{path}-{i}", depth + 1)
            for i, child in enumerate(node.get("children", []))
        )
        return MindMapNode(
            id=path,
            label=node["label"],
            children=children,
            annotation=node.get("annotation") if not children else None,
            expanded=(depth == 0),
        )

    return MindMap(root=build(response.payload["root"], "m", 0))


def toggle_node(mind_map: MindMap, node_id: str) -> MindMap:
    """Flip one node's expanded flag; everything else unchanged."""
    if mind_map.find(node_id) is None:
        raise UnknownNode(f"no node {node_id!r} in map")

    def walk(node: MindMapNode) -> MindMapNode:
        if node.id == node_id:
            return replace(node, expanded=not node.expanded)
        return replace(node, children=tuple(walk(c) for c in node.children))

    return MindMap(root=walk(mind_map.root))
