"""End-to-end orchestration: personalize once, then fan out to every view.

Stage 1 runs exactly once and its failure is fatal. Stage 2 generators all
consume the Stage-1 output, never the raw source; they are independent and
may run concurrently (bounded by the provider's max_parallel). A failing
Stage-2 artifact becomes an explicit failure marker in the manifest while
the rest of the bundle survives.

Bundles serialize to a directory of canonical JSON artifacts plus a
manifest whose per-artifact entries all record the hash of the one
personalized document they derive from. Wall-clock timings go to a
separate sidecar so bundle bytes stay reproducible.
"""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .assessment import MCQuestion, Quiz, generate_embedded_question, generate_quiz
from .config import PipelineConfig
from .document_model import BlockKind, LearnerProfile, SourceDocument
from .gateway import Gateway
from .immersive import (
    IllustrationSpec,
    ImageProvider,
    ImmersiveDocument,
    MockImageProvider,
    Mnemonic,
    Timeline,
    assemble_immersive,
    detect_sequences,
    generate_mnemonic,
    plan_illustrations,
)
from .personalization import PersonalizedDocument, personalize
from .serialization import content_hash, read_json, write_canonical
from .transformations import (
    DialogueLesson,
    MindMap,
    NarrationTrack,
    SlideDeck,
    generate_dialogue_lesson,
    generate_mind_map,
    generate_narration,
    generate_slides,
)

SCHEMA_VERSION = 1

ARTIFACT_FILES = {
    "pdoc": "pdoc.json",
    "immersive": "immersive.json",
    "slides": "slides.json",
    "narration": "narration.json",
    "lesson": "lesson.json",
    "mindmap": "mindmap.json",
    "timelines": "timelines.json",
    "mnemonics": "mnemonics.json",
    "illustrations": "illustrations.json",
    "embedded": "embedded.json",
    "quizzes": "quizzes.json",
}


def derive_seed(base_seed: int, artifact: str) -> int:
    """Per-artifact seed, independent of task scheduling order."""
    digest = hashlib.sha256(f"{base_seed}:{artifact}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


@dataclass
class ContentBundle:
    """Everything generated for one (document, profile) pair."""

    pdoc: PersonalizedDocument
    slides: SlideDeck | None = None
    narration: NarrationTrack | None = None
    lesson: DialogueLesson | None = None
    mindmap: MindMap | None = None
    timelines: list[Timeline] = field(default_factory=list)
    mnemonics: list[Mnemonic] = field(default_factory=list)
    illustrations: list[IllustrationSpec] = field(default_factory=list)
    embedded: dict[str, list[MCQuestion]] = field(default_factory=dict)
    quizzes: dict[str, Quiz] = field(default_factory=dict)
    immersive: ImmersiveDocument | None = None
    failures: dict[str, str] = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)  # wall clock; never part of the manifest

    def write(self, bundle_dir: Path, timings: dict | None = None) -> None:
        bundle_dir = Path(bundle_dir)
        write_canonical(bundle_dir / ARTIFACT_FILES["pdoc"], self.pdoc.to_dict())
        if self.slides is not None:
            write_canonical(bundle_dir / ARTIFACT_FILES["slides"], self.slides.to_dict())
        if self.narration is not None:
            write_canonical(bundle_dir / ARTIFACT_FILES["narration"], self.narration.to_dict())
        if self.lesson is not None:
            write_canonical(bundle_dir / ARTIFACT_FILES["lesson"], self.lesson.to_dict())
        if self.mindmap is not None:
            write_canonical(bundle_dir / ARTIFACT_FILES["mindmap"], self.mindmap.to_dict())
        write_canonical(
            bundle_dir / ARTIFACT_FILES["timelines"], [t.to_dict() for t in self.timelines]
        )
        write_canonical(
            bundle_dir / ARTIFACT_FILES["mnemonics"], [m.to_dict() for m in self.mnemonics]
        )
        write_canonical(
            bundle_dir / ARTIFACT_FILES["illustrations"],
            [i.to_dict() for i in self.illustrations],
        )
        write_canonical(
            bundle_dir / ARTIFACT_FILES["embedded"],
            {sid: [q.to_dict() for q in qs] for sid, qs in self.embedded.items()},
        )
        write_canonical(
            bundle_dir / ARTIFACT_FILES["quizzes"],
            {sid: quiz.to_dict() for sid, quiz in self.quizzes.items()},
        )
        if self.immersive is not None:
            write_canonical(bundle_dir / ARTIFACT_FILES["immersive"], self.immersive.to_dict())
        write_canonical(bundle_dir / "manifest.json", self.manifest)
        # sidecar: wall-clock values, excluded from bundle determinism
        write_canonical(bundle_dir / "timings.json", timings if timings is not None else self.timings)


def _section_fact_lists(pdoc: PersonalizedDocument) -> dict[str, list[str]]:
    """Key terms worth memorizing: first word of each entry in a section's list block."""
    facts: dict[str, list[str]] = {}
    for section in pdoc.base.sections:
        for block in section.blocks:
            if block.kind is not BlockKind.list:
                continue
            terms = []
            for line in pdoc.final_block_text(block.id).splitlines():
                item = line.lstrip("-* \t").strip()
                if not item:
                    continue
                first = item.split()[0].strip(",.;:")
                if first:
                    terms.append(first)
            if 2 <= len(terms) <= 10:
                facts[section.id] = terms
                break
    return facts


def run_pipeline(
    doc: SourceDocument,
    profile: LearnerProfile,
    gateway: Gateway,
    cfg: PipelineConfig,
    seed: int = 0,
    image_provider: ImageProvider | None = None,
    concurrent: bool = True,
) -> ContentBundle:
    """Two stages: personalize, then expand into every view and assessment.

    Stage-1 errors propagate (nothing to expand). Stage-2 errors per
    artifact are captured as failure markers. Output is identical whether
    Stage 2 runs sequentially or concurrently.
    """
    timings: dict[str, float] = {}
    requests_before = gateway.total_requests
    t0 = time.perf_counter()
    pdoc = personalize(doc, profile, gateway, cfg, seed=derive_seed(seed, "personalize"))
    timings["personalize"] = time.perf_counter() - t0

    bundle = ContentBundle(pdoc=pdoc)
    image_provider = image_provider if image_provider is not None else MockImageProvider()

    def slides_task():
        deck = generate_slides(pdoc, gateway, cfg, seed=derive_seed(seed, "slides"))
        narration = generate_narration(deck, gateway, cfg, seed=derive_seed(seed, "narration"))
        return deck, narration

    def lesson_task():
        return generate_dialogue_lesson(pdoc, gateway, cfg, seed=derive_seed(seed, "lesson"))

    def mindmap_task():
        return generate_mind_map(pdoc, gateway, cfg, seed=derive_seed(seed, "mindmap"))

    def timelines_task():
        return detect_sequences(pdoc, gateway, cfg, seed=derive_seed(seed, "timelines"))

    def mnemonics_task():
        out = []
        for section_id, facts in sorted(_section_fact_lists(pdoc).items()):
            out.append(
                generate_mnemonic(
                    facts,
                    gateway,
                    cfg,
                    anchor_section=section_id,
                    seed=derive_seed(seed, f"mnemonic:{section_id}"),
                )
            )
        return out

    def illustrations_task():
        return plan_illustrations(
            pdoc, gateway, cfg, image_provider=image_provider,
            seed=derive_seed(seed, "illustrations"),
        )

    def embedded_task():
        questions: dict[str, list[MCQuestion]] = {}
        for section in pdoc.base.sections:
            anchors = [b.id for b in section.blocks if b.kind is BlockKind.paragraph]
            anchors = anchors[: cfg.embedded_per_section]
            generated = [
                generate_embedded_question(
                    anchor, pdoc, gateway, cfg, seed=derive_seed(seed, f"embedded:{anchor}")
                )
                for anchor in anchors
            ]
            if generated:
                questions[section.id] = generated
        return questions

    def quizzes_task():
        return {
            section.id: generate_quiz(
                section.id, pdoc, gateway, cfg, seed=derive_seed(seed, f"quiz:{section.id}")
            )
            for section in pdoc.base.sections
            if section.blocks
        }

    tasks = {
        "slides": slides_task,
        "lesson": lesson_task,
        "mindmap": mindmap_task,
        "timelines": timelines_task,
        "mnemonics": mnemonics_task,
        "illustrations": illustrations_task,
        "embedded": embedded_task,
        "quizzes": quizzes_task,
    }

    results: dict[str, object] = {}

    def run_one(name: str):
        start = time.perf_counter()
        try:
            return name, tasks[name](), None, time.perf_counter() - start
        except Exception as exc:  # captured as a per-artifact failure marker
            return name, None, f"{type(exc).__name__}: {exc}", time.perf_counter() - start

    if concurrent:
        with ThreadPoolExecutor(max_workers=gateway.cfg.max_parallel) as pool:
            outcomes = list(pool.map(run_one, tasks))
    else:
        outcomes = [run_one(name) for name in tasks]

    for name, value, error, elapsed in outcomes:
        timings[name] = elapsed
        if error is not None:
            bundle.failures[name] = error
        else:
            results[name] = value

    if "slides" in results:
        bundle.slides, bundle.narration = results["slides"]
    bundle.lesson = results.get("lesson")
    bundle.mindmap = results.get("mindmap")
    bundle.timelines = results.get("timelines", [])
    bundle.mnemonics = results.get("mnemonics", [])
    bundle.illustrations = results.get("illustrations", [])
    bundle.embedded = results.get("embedded", {})
    bundle.quizzes = results.get("quizzes", {})

    try:
        bundle.immersive = assemble_immersive(
            pdoc,
            timelines=bundle.timelines,
            mnemonics=bundle.mnemonics,
            illustrations=bundle.illustrations,
            embedded_questions=bundle.embedded,
            quizzes=bundle.quizzes,
        )
    except Exception as exc:
        bundle.failures["immersive"] = f"{type(exc).__name__}: {exc}"

    bundle.manifest = _build_manifest(
        bundle, doc, profile, cfg, seed, gateway.total_requests - requests_before
    )
    bundle.timings = timings
    return bundle


def _build_manifest(
    bundle: ContentBundle,
    doc: SourceDocument,
    profile: LearnerProfile,
    cfg: PipelineConfig,
    seed: int,
    request_count: int,
) -> dict:
    pdoc_hash = content_hash(bundle.pdoc.to_dict())
    artifacts: dict[str, dict] = {}

    def entry(name: str, obj) -> None:
        if name in bundle.failures:
            artifacts[name] = {"status": "failed", "error": bundle.failures[name], "pdoc_hash": pdoc_hash}
        elif obj is None:
            artifacts[name] = {"status": "failed", "error": "not generated", "pdoc_hash": pdoc_hash}
        else:
            artifacts[name] = {
                "status": "ok",
                "content_hash": content_hash(obj),
                "pdoc_hash": pdoc_hash,
            }

    entry("slides", bundle.slides.to_dict() if bundle.slides else None)
    entry("narration", bundle.narration.to_dict() if bundle.narration else None)
    entry("lesson", bundle.lesson.to_dict() if bundle.lesson else None)
    entry("mindmap", bundle.mindmap.to_dict() if bundle.mindmap else None)
    entry("timelines", [t.to_dict() for t in bundle.timelines])
    entry("mnemonics", [m.to_dict() for m in bundle.mnemonics])
    entry("illustrations", [i.to_dict() for i in bundle.illustrations])
    entry("embedded", {s: [q.to_dict() for q in qs] for s, qs in bundle.embedded.items()})
    entry("quizzes", {s: q.to_dict() for s, q in bundle.quizzes.items()})
    entry("immersive", bundle.immersive.to_dict() if bundle.immersive else None)

    return {
        "document_id": doc.id,
        "profile": {"grade_level": profile.grade_level, "interest": profile.interest},
        "seed": seed,
        "pdoc_hash": pdoc_hash,
        "artifacts": artifacts,
        "config": cfg.snapshot(),
        "versions": {"package": __version__, "bundle_schema": SCHEMA_VERSION},
        "counters": {"gateway_requests": request_count},
    }


def load_bundle_dir(bundle_dir: Path) -> dict:
    """Raw artifact dicts for serving; missing files map to None."""
    bundle_dir = Path(bundle_dir)
    out: dict = {"manifest": read_json(bundle_dir / "manifest.json")}
    for name, filename in ARTIFACT_FILES.items():
        path = bundle_dir / filename
        out[name] = read_json(path) if path.exists() else None
    return out
