"""Deterministic fallback content for the mock provider.

When no script rule matches, the mock provider synthesizes a schema-valid
payload purely from the request (context parts, params, seed). Output is a
function of the request fingerprint — no global state — so runs are
reproducible and safe under concurrency.

Dialogue text deliberately never quotes source material verbatim: concept
labels are capped below the 20-character isolation window and the scaffold
wording is synthetic, so conversation history stays clean for the student
persona.
"""

from __future__ import annotations

import hashlib
import json
import random
from typing import Any

from .gateway import GenerationRequest, Persona, TaskTag
from .readability import split_sentences

_STOPWORDS = frozenset(
    "the a an and or but of to in on for with by is are was were be as at "
    "that this it from into about over under between within how what when "
    "why where which who whom whose their there then than they them these "
    "those its his her our your my we you i not no nor so if because while "
    "can could will would shall should may might must do does did done have "
    "has had having also more most some any each every all both few other "
    "own same such only very just too now new one two three".split()
)

# One word per initial letter per slot; mnemonic sentences are drawn from here.
_LETTER_WORDS = {
    "a": ["Apples", "Active", "Agile"],
    "b": ["Bears", "Bright", "Bold"],
    "c": ["Carry", "Calm", "Clever"],
    "d": ["Dance", "Daring", "Deep"],
    "e": ["Every", "Eager", "Early"],
    "f": ["Foxes", "Fast", "Friendly"],
    "g": ["Gather", "Gentle", "Grand"],
    "h": ["Happy", "Helpful", "Hearty"],
    "i": ["Inspire", "Icy", "Inventive"],
    "j": ["Jump", "Jolly", "Joyful"],
    "k": ["Kind", "Keen", "Knowing"],
    "l": ["Lively", "Loyal", "Lucky"],
    "m": ["Merry", "Mighty", "Modest"],
    "n": ["Nimble", "Noble", "Neat"],
    "o": ["Open", "Orderly", "Optimistic"],
    "p": ["Playful", "Patient", "Proud"],
    "q": ["Quick", "Quiet", "Quirky"],
    "r": ["Ready", "Rapid", "Restful"],
    "s": ["Steady", "Swift", "Smart"],
    "t": ["Together", "Tidy", "Thoughtful"],
    "u": ["Upbeat", "Useful", "Unique"],
    "v": ["Vivid", "Valiant", "Vast"],
    "w": ["Wise", "Warm", "Willing"],
    "x": ["Xylophones", "Xenial", "Xeric"],
    "y": ["Young", "Yearly", "Yielding"],
    "z": ["Zesty", "Zippy", "Zealous"],
}


def _rng(request: GenerationRequest) -> random.Random:
    digest = hashlib.sha256(request.fingerprint().encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _content_words(text: str) -> list[str]:
    cleaned = "".join(c if c.isalnum() else " " for c in text.lower())
    return [w for w in cleaned.split() if len(w) >= 3 and w not in _STOPWORDS and not w.isdigit()]


def _sentences(text: str) -> list[str]:
    return [s.strip() for s in split_sentences(text) if s.strip()]


def _trunc(text: str, limit: int) -> str:
    if len(text) <= limit:
        return text
    cut = text[:limit].rsplit(" ", 1)[0]
    return (cut or text[:limit]).rstrip(",;: ")


def _short_label(heading: str) -> str:
    """A quotable label strictly under 20 chars (isolation window size)."""
    words = _content_words(heading) or [w.lower() for w in heading.split()][:1] or ["topic"]
    label = words[0][:12]
    if len(words) > 1:
        label += " " + words[1][:6]
    return label


def _json_part(request: GenerationRequest, label: str) -> Any:
    raw = request.part(label)
    return json.loads(raw) if raw else None


def _synth_relevel(request: GenerationRequest, rng: random.Random) -> dict:
    blocks = _json_part(request, "section_blocks") or []
    return {"blocks": [{"block_id": b["id"], "text": b["text"]} for b in blocks]}


def _synth_select_segments(request: GenerationRequest, rng: random.Random) -> dict:
    blocks = _json_part(request, "blocks") or []
    budget = int(request.part("max_chars") or "0")
    take = rng.randint(1, 3)
    segments: list[dict] = []
    used = 0
    for block in blocks:
        if len(segments) >= take:
            break
        sents = _sentences(block["text"])
        if not sents:
            continue
        end = block["text"].find(sents[0]) + len(sents[0])
        if used + end > budget:
            continue
        segments.append({"block_id": block["id"], "start": 0, "end": end})
        used += end
    return {"segments": segments}


def _synth_rewrite(request: GenerationRequest, rng: random.Random) -> dict:
    interest = request.part("interest") or "everyday life"
    segment = request.part("segment_text") or ""
    template = rng.choice(
        [
            "Picture this through {interest}: {segment}",
            "Here is a {interest} way to see it: {segment}",
            "If you follow {interest}, try this angle: {segment}",
        ]
    )
    return {"text": template.format(interest=interest, segment=segment)}


def _synth_slides(request: GenerationRequest, rng: random.Random) -> dict:
    doc = _json_part(request, "document") or {"sections": []}
    interest = request.part("interest")
    max_bullets = int(request.params.get("max_bullets", 5))
    slides = []
    sections = doc.get("sections", [])
    for i, sec in enumerate(sections):
        bullets = [_trunc(s, 110) for s in _sentences(sec.get("text", ""))[: min(3, max_bullets)]]
        if not bullets:
            bullets = [f"Key points of {sec['heading']}"]
        slide: dict[str, Any] = {
            "title": sec["heading"],
            "bullets": bullets,
            "section_refs": [sec["id"]],
            "visual_brief": f"Simple sketch capturing {_short_label(sec['heading'])}",
        }
        if i == 0:
            hook = f" a {interest} moment" if interest else " something you already know"
            slide["opener_question"] = f"Before we start: how could {_short_label(sec['heading'])} connect to{hook}?"
        if i == len(sections) - 1:
            slide["activity"] = "Explain the main idea of this material to a friend in two sentences."
        slides.append(slide)
    return {"slides": slides, "omissions": []}


def _synth_narration(request: GenerationRequest, rng: random.Random) -> dict:
    deck = _json_part(request, "deck") or {"slides": []}
    connectors = [
        "Notice how this builds on the previous slide.",
        "Keep this picture in mind as we go on.",
        "This is the part learners often find surprising.",
    ]
    segments = []
    for i, slide in enumerate(deck.get("slides", [])):
        bullets = " ".join(slide.get("bullets", []))
        segments.append(
            {
                "slide_index": i,
                "text": f"{slide['title']}. {bullets} {connectors[i % len(connectors)]}",
            }
        )
    return {"segments": segments}


def _synth_concept_graph(request: GenerationRequest, rng: random.Random) -> dict:
    doc = _json_part(request, "document") or {"sections": []}
    nodes = []
    for i, sec in enumerate(doc.get("sections", [])):
        label = _short_label(sec["heading"])
        nodes.append(
            {
                "id": f"c{i + 1}",
                "label": label,
                "summary": f"The main idea in play when we talk about {label}.",
            }
        )
    if not nodes:
        nodes = [{"id": "c1", "label": "main idea", "summary": "The single idea of this material."}]
    edges = [
        {"from": nodes[i]["id"], "to": nodes[i + 1]["id"], "relation": "leads to"}
        for i in range(len(nodes) - 1)
    ]
    return {"nodes": nodes, "edges": edges}


def _synth_dialogue_turn(request: GenerationRequest, rng: random.Random) -> dict:
    if request.persona == Persona.student:
        history = _json_part(request, "history") or []
        teacher_texts = [t["text"] for t in history if t.get("speaker") == "teacher"]
        words = _content_words(teacher_texts[-1])[:8] if teacher_texts else []
        topic = rng.choice(words)[:12] if words else "that last part"
        template = rng.choice(
            [
                "I think I follow. Could you say more about why {topic} matters?",
                "Wait, so {topic} is the key piece here? Let me see if I have it right.",
                "That makes sense so far, but {topic} still feels fuzzy to me.",
            ]
        )
        return {"text": template.format(topic=topic), "revealed_concepts": []}

    concepts = {c["id"]: c for c in (_json_part(request, "concepts") or [])}
    unrevealed = _json_part(request, "unrevealed") or []
    if not unrevealed:
        return {
            "text": "And that covers everything I wanted to show you today. Nicely done.",
            "revealed_concepts": [],
        }
    chosen = unrevealed[: rng.randint(1, min(2, len(unrevealed)))]
    labels = [concepts[c]["label"] if c in concepts else c for c in chosen]
    opener = rng.choice(
        ["Here is our next focus:", "Now we move on to", "Let us look closely at"]
    )
    text = (
        f"{opener} {' and '.join(labels)}. "
        f"{' '.join(concepts[c]['summary'] for c in chosen if c in concepts)} "
        f"What do you already know about {labels[0]}?"
    )
    return {"text": text, "revealed_concepts": chosen}


def _synth_mindmap(request: GenerationRequest, rng: random.Random) -> dict:
    doc = _json_part(request, "document") or {"title": "Material", "sections": []}

    def block_leaf(block: dict) -> dict:
        words = block["text"].split()
        label = _trunc(" ".join(words[:4]), 40) or "detail"
        if block.get("kind") == "figure_caption":
            annotation = {"image_ref": "img-" + hashlib.sha256(block["text"].encode()).hexdigest()[:10]}
        else:
            first = _sentences(block["text"])
            annotation = {"text": _trunc(first[0] if first else block["text"], 120)}
        return {"label": label, "children": [], "annotation": annotation}

    sections = doc.get("sections", [])

    def build(index: int) -> tuple[dict, int]:
        sec = sections[index]
        node = {"label": sec["heading"], "children": []}
        node["children"].extend(block_leaf(b) for b in sec.get("blocks", []))
        next_index = index + 1
        while next_index < len(sections) and sections[next_index]["depth"] > sec["depth"]:
            child, next_index = build(next_index)
            node["children"].append(child)
        return node, next_index

    children = []
    i = 0
    while i < len(sections):
        node, i = build(i)
        children.append(node)
    root: dict[str, Any] = {"label": doc.get("title", "Material"), "children": children}
    if not children:
        root["annotation"] = {"text": "Empty material."}
    return {"root": root}


def _synth_timeline(request: GenerationRequest, rng: random.Random) -> dict:
    text = request.part("section_text") or ""
    items = []
    seen = set()
    for sentence in _sentences(text):
        lead = sentence.split()[0].strip(",.;:!?") if sentence.split() else ""
        if len(lead) < 3 or lead.lower() in seen or lead.lower() in _STOPWORDS:
            continue
        seen.add(lead.lower())
        items.append({"label": lead, "description": _trunc(sentence, 160)})
        if len(items) == 6:
            break
    if len(items) < 3:
        return {"timelines": []}
    return {"timelines": [{"items": items, "exercise_enabled": True}]}


def _synth_mnemonic(request: GenerationRequest, rng: random.Random) -> dict:
    items = _json_part(request, "items") or []
    words = []
    for item in items:
        first = str(item)[0].lower() if str(item) else "x"
        if first in _LETTER_WORDS:
            words.append(rng.choice(_LETTER_WORDS[first]))
        else:
            words.append(str(item)[0] + "-step")
    return {"sentence": " ".join(words) + "."}


def _synth_illustration_brief(request: GenerationRequest, rng: random.Random) -> dict:
    doc = _json_part(request, "document") or {"sections": []}
    interest = request.part("interest")
    specs = []
    for sec in doc.get("sections", []):
        blocks = sec.get("blocks", [])
        target = next((b for b in blocks if b.get("kind") == "figure_caption"), None)
        if target is None:
            target = next((b for b in blocks if len(b.get("text", "")) > 120), None)
        if target is None:
            continue
        topic = " ".join(_content_words(target["text"])[:6]) or "the main idea"
        brief = f"Clean, simple educational diagram of {topic}"
        if interest:
            brief += f", staged in a {interest} setting"
        first = _sentences(target["text"])
        specs.append(
            {
                "block_id": target["id"],
                "brief": brief,
                "caption": _trunc(first[0] if first else target["text"], 100),
            }
        )
    return {"illustrations": specs}


def _mcq_from_sentence(
    sentence: str, topic: str, difficulty: str, ordinal: int, rng: random.Random
) -> dict:
    correct = _trunc(sentence, 90)
    distractors = [
        f"It claims the opposite of what the material says about {topic}",
        f"The material never discusses {topic} at this point",
        f"This part is only an aside with no link to {topic}",
    ]
    options = [correct] + distractors
    rng.shuffle(options)
    return {
        "stem": f"Which statement about {topic} best matches part {ordinal} of the material?",
        "options": options,
        "correct_index": options.index(correct),
        "difficulty": difficulty,
        "topic_tag": topic,
    }


def _synth_embedded_question(request: GenerationRequest, rng: random.Random) -> dict:
    anchor_text = request.part("anchor_text") or ""
    sents = _sentences(anchor_text) or [anchor_text or "the material"]
    words = _content_words(anchor_text)
    topic = words[0] if words else "this idea"
    difficulty = rng.choice(["easy", "medium", "hard"])
    return _mcq_from_sentence(sents[0], topic, difficulty, 1, rng)


def _synth_quiz(request: GenerationRequest, rng: random.Random) -> dict:
    text = request.part("section_text") or ""
    lo = int(request.params.get("min_questions", 5))
    hi = int(request.params.get("max_questions", 10))
    count = min(max(6, lo), hi)
    sents = _sentences(text) or ["This section has one main idea."]
    # topic tags must come from the body text so stems stay grounded in it
    words = list(dict.fromkeys(_content_words(text)))
    tags = words[:2] or ["main idea"]
    questions = []
    for i in range(count):
        questions.append(
            _mcq_from_sentence(
                sents[i % len(sents)],
                tags[i % len(tags)],
                ("easy", "medium", "hard")[i % 3],
                i + 1,
                rng,
            )
        )
    return {"questions": questions}


def _synth_quiz_feedback(request: GenerationRequest, rng: random.Random) -> dict:
    result = _json_part(request, "result") or {}
    score = result.get("score", 0.0)
    glows = ", ".join(result.get("glows", [])) or "none yet"
    grows = ", ".join(result.get("grows", [])) or "nothing, great work"
    return {
        "text": (
            f"You scored {round(score * 100)} percent. "
            f"Strengths: {glows}. Focus next on: {grows}."
        )
    }


_SYNTHESIZERS = {
    TaskTag.relevel: _synth_relevel,
    TaskTag.select_segments: _synth_select_segments,
    TaskTag.rewrite_segment: _synth_rewrite,
    TaskTag.slides: _synth_slides,
    TaskTag.narration: _synth_narration,
    TaskTag.concept_graph: _synth_concept_graph,
    TaskTag.dialogue_turn: _synth_dialogue_turn,
    TaskTag.mindmap: _synth_mindmap,
    TaskTag.timeline: _synth_timeline,
    TaskTag.mnemonic: _synth_mnemonic,
    TaskTag.illustration_brief: _synth_illustration_brief,
    TaskTag.embedded_question: _synth_embedded_question,
    TaskTag.quiz: _synth_quiz,
    TaskTag.quiz_feedback: _synth_quiz_feedback,
}


def synthesize(request: GenerationRequest) -> Any:
    """Schema-valid deterministic payload for any task tag."""
    return _SYNTHESIZERS[request.task_tag](request, _rng(request))
