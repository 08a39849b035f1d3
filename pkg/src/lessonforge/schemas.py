"""Structural validation of generation payloads, one validator per task tag.

Every payload leaving the gateway must pass its tag's validator. Validators
return a list of human-readable violations (empty means valid); the retry
loop feeds these back to the provider. Contextual rules that need documents
or budgets (grounding, ranges, coverage) live with the calling operations
and are passed to the gateway as extra validators.
"""

from __future__ import annotations

from typing import Any, Callable

DIFFICULTIES = ("easy", "medium", "hard")

Validator = Callable[[Any, dict], list[str]]


def _is_nonempty_str(v: Any) -> bool:
    return isinstance(v, str) and bool(v.strip())


def _check_str_field(obj: dict, key: str, where: str, out: list[str]) -> None:
    if not _is_nonempty_str(obj.get(key)):
        out.append(f"{where}: field '{key}' must be a non-empty string")


def _require_dict(payload: Any, out: list[str]) -> bool:
    if not isinstance(payload, dict):
        out.append("payload must be an object")
        return False
    return True


def _require_list(payload: dict, key: str, out: list[str], allow_empty: bool = False) -> list:
    v = payload.get(key)
    if not isinstance(v, list) or (not allow_empty and not v):
        out.append(f"field '{key}' must be a {'possibly empty ' if allow_empty else 'non-empty '}list")
        return []
    return v


def validate_relevel(payload: Any, params: dict) -> list[str]:
    out: list[str] = []
    if not _require_dict(payload, out):
        return out
    for i, blk in enumerate(_require_list(payload, "blocks", out)):
        if not isinstance(blk, dict):
            out.append(f"blocks[{i}] must be an object")
            continue
        _check_str_field(blk, "block_id", f"blocks[{i}]", out)
        _check_str_field(blk, "text", f"blocks[{i}]", out)
    return out


def validate_select_segments(payload: Any, params: dict) -> list[str]:
    out: list[str] = []
    if not _require_dict(payload, out):
        return out
    for i, seg in enumerate(_require_list(payload, "segments", out, allow_empty=True)):
        if not isinstance(seg, dict):
            out.append(f"segments[{i}] must be an object")
            continue
        _check_str_field(seg, "block_id", f"segments[{i}]", out)
        start, end = seg.get("start"), seg.get("end")
        if not isinstance(start, int) or not isinstance(end, int) or start < 0 or end <= start:
            out.append(f"segments[{i}]: need integers 0 <= start < end")
    return out


def validate_rewrite_segment(payload: Any, params: dict) -> list[str]:
    out: list[str] = []
    if _require_dict(payload, out):
        _check_str_field(payload, "text", "payload", out)
    return out


def _validate_slide(slide: Any, i: int, max_bullets: int, out: list[str]) -> None:
    if not isinstance(slide, dict):
        out.append(f"slides[{i}] must be an object")
        return
    _check_str_field(slide, "title", f"slides[{i}]", out)
    bullets = slide.get("bullets")
    if not isinstance(bullets, list) or not bullets:
        out.append(f"slides[{i}]: 'bullets' must be a non-empty list")
    else:
        if len(bullets) > max_bullets:
            out.append(f"slides[{i}]: {len(bullets)} bullets exceeds cap {max_bullets}")
        for j, b in enumerate(bullets):
            if not _is_nonempty_str(b):
                out.append(f"slides[{i}].bullets[{j}] must be a non-empty string")
    refs = slide.get("section_refs")
    if not isinstance(refs, list) or not refs or not all(_is_nonempty_str(r) for r in refs):
        out.append(f"slides[{i}]: 'section_refs' must be a non-empty list of ids")
    for opt in ("visual_brief", "opener_question", "activity"):
        if opt in slide and slide[opt] is not None and not _is_nonempty_str(slide[opt]):
            out.append(f"slides[{i}]: optional '{opt}' must be a non-empty string when present")


def validate_slides(payload: Any, params: dict) -> list[str]:
    out: list[str] = []
    if not _require_dict(payload, out):
        return out
    max_bullets = int(params.get("max_bullets", 5))
    for i, slide in enumerate(_require_list(payload, "slides", out)):
        _validate_slide(slide, i, max_bullets, out)
    omissions = payload.get("omissions", [])
    if not isinstance(omissions, list) or not all(_is_nonempty_str(o) for o in omissions):
        out.append("'omissions' must be a list of section ids")
    return out


def validate_narration(payload: Any, params: dict) -> list[str]:
    out: list[str] = []
    if not _require_dict(payload, out):
        return out
    for i, seg in enumerate(_require_list(payload, "segments", out)):
        if not isinstance(seg, dict):
            out.append(f"segments[{i}] must be an object")
            continue
        if not isinstance(seg.get("slide_index"), int) or seg["slide_index"] < 0:
            out.append(f"segments[{i}]: 'slide_index' must be a non-negative integer")
        _check_str_field(seg, "text", f"segments[{i}]", out)
    return out


def validate_concept_graph(payload: Any, params: dict) -> list[str]:
    out: list[str] = []
    if not _require_dict(payload, out):
        return out
    nodes = _require_list(payload, "nodes", out)
    ids: list[str] = []
    for i, n in enumerate(nodes):
        if not isinstance(n, dict):
            out.append(f"nodes[{i}] must be an object")
            continue
        for key in ("id", "label", "summary"):
            _check_str_field(n, key, f"nodes[{i}]", out)
        if _is_nonempty_str(n.get("id")):
            ids.append(n["id"])
    if len(ids) != len(set(ids)):
        out.append("node ids must be unique")
    id_set = set(ids)
    adjacency: dict[str, set[str]] = {i: set() for i in id_set}
    for i, e in enumerate(_require_list(payload, "edges", out, allow_empty=True)):
        if not isinstance(e, dict):
            out.append(f"edges[{i}] must be an object")
            continue
        src, dst = e.get("from"), e.get("to")
        _check_str_field(e, "relation", f"edges[{i}]", out)
        if src not in id_set or dst not in id_set:
            out.append(f"edges[{i}] references unknown node")
        else:
            adjacency[src].add(dst)
            adjacency[dst].add(src)
    if ids and not out:
        seen = {ids[0]}
        frontier = [ids[0]]
        while frontier:
            for nxt in adjacency[frontier.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        if seen != id_set:
            out.append("concept graph must be connected")
    return out


def validate_dialogue_turn(payload: Any, params: dict) -> list[str]:
    out: list[str] = []
    if not _require_dict(payload, out):
        return out
    _check_str_field(payload, "text", "payload", out)
    revealed = payload.get("revealed_concepts", [])
    if not isinstance(revealed, list) or not all(_is_nonempty_str(c) for c in revealed):
        out.append("'revealed_concepts' must be a list of concept ids")
    return out


def _walk_mindmap(node: Any, path: str, out: list[str]) -> None:
    if not isinstance(node, dict):
        out.append(f"{path}: node must be an object")
        return
    _check_str_field(node, "label", path, out)
    children = node.get("children", [])
    if not isinstance(children, list):
        out.append(f"{path}: 'children' must be a list")
        children = []
    annotation = node.get("annotation")
    if annotation is not None:
        if children:
            out.append(f"{path}: only leaf nodes may carry annotations")
        if not isinstance(annotation, dict) or not (
            _is_nonempty_str(annotation.get("text")) or _is_nonempty_str(annotation.get("image_ref"))
        ):
            out.append(f"{path}: annotation needs 'text' or 'image_ref'")
    for i, child in enumerate(children):
        _walk_mindmap(child, f"{path}.children[{i}]", out)


def validate_mindmap(payload: Any, params: dict) -> list[str]:
    out: list[str] = []
    if not _require_dict(payload, out):
        return out
    if "root" not in payload:
        out.append("payload must carry a 'root' node")
    else:
        _walk_mindmap(payload["root"], "root", out)
    return out


def validate_timeline(payload: Any, params: dict) -> list[str]:
    out: list[str] = []
    if not _require_dict(payload, out):
        return out
    for i, tl in enumerate(_require_list(payload, "timelines", out, allow_empty=True)):
        if not isinstance(tl, dict):
            out.append(f"timelines[{i}] must be an object")
            continue
        items = tl.get("items")
        if not isinstance(items, list):
            out.append(f"timelines[{i}]: 'items' must be a list")
            continue
        for j, item in enumerate(items):
            if not isinstance(item, dict):
                out.append(f"timelines[{i}].items[{j}] must be an object")
                continue
            _check_str_field(item, "label", f"timelines[{i}].items[{j}]", out)
            if "description" in item and not isinstance(item["description"], str):
                out.append(f"timelines[{i}].items[{j}]: 'description' must be a string")
    return out


def validate_mnemonic(payload: Any, params: dict) -> list[str]:
    out: list[str] = []
    if _require_dict(payload, out):
        _check_str_field(payload, "sentence", "payload", out)
    return out


def validate_illustration_brief(payload: Any, params: dict) -> list[str]:
    out: list[str] = []
    if not _require_dict(payload, out):
        return out
    for i, spec_ in enumerate(_require_list(payload, "illustrations", out, allow_empty=True)):
        if not isinstance(spec_, dict):
            out.append(f"illustrations[{i}] must be an object")
            continue
        _check_str_field(spec_, "block_id", f"illustrations[{i}]", out)
        _check_str_field(spec_, "brief", f"illustrations[{i}]", out)
        if "caption" in spec_ and not isinstance(spec_["caption"], str):
            out.append(f"illustrations[{i}]: 'caption' must be a string")
    return out


def validate_mcq(q: Any, where: str, out: list[str]) -> None:
    if not isinstance(q, dict):
        out.append(f"{where} must be an object")
        return
    _check_str_field(q, "stem", where, out)
    options = q.get("options")
    if not isinstance(options, list) or not (3 <= len(options) <= 5):
        out.append(f"{where}: 'options' must hold 3-5 entries")
    else:
        if not all(_is_nonempty_str(o) for o in options):
            out.append(f"{where}: options must be non-empty strings")
        elif len(set(options)) != len(options):
            out.append(f"{where}: options must be pairwise distinct")
        ci = q.get("correct_index")
        if not isinstance(ci, int) or not 0 <= ci < len(options):
            out.append(f"{where}: 'correct_index' out of option bounds")
    if q.get("difficulty") not in DIFFICULTIES:
        out.append(f"{where}: 'difficulty' must be one of {DIFFICULTIES}")
    _check_str_field(q, "topic_tag", where, out)


def validate_embedded_question(payload: Any, params: dict) -> list[str]:
    out: list[str] = []
    if _require_dict(payload, out):
        validate_mcq(payload, "question", out)
    return out


def validate_quiz(payload: Any, params: dict) -> list[str]:
    out: list[str] = []
    if not _require_dict(payload, out):
        return out
    lo = int(params.get("min_questions", 5))
    hi = int(params.get("max_questions", 10))
    questions = _require_list(payload, "questions", out)
    if questions and not (lo <= len(questions) <= hi):
        out.append(f"quiz must hold {lo}-{hi} questions, got {len(questions)}")
    for i, q in enumerate(questions):
        validate_mcq(q, f"questions[{i}]", out)
    difficulties = {q.get("difficulty") for q in questions if isinstance(q, dict)}
    if questions and len(difficulties & set(DIFFICULTIES)) < 2:
        out.append("quiz must mix at least 2 difficulty levels")
    return out


def validate_quiz_feedback(payload: Any, params: dict) -> list[str]:
    out: list[str] = []
    if _require_dict(payload, out):
        _check_str_field(payload, "text", "payload", out)
    return out


VALIDATORS: dict[str, Validator] = {
    "relevel": validate_relevel,
    "select_segments": validate_select_segments,
    "rewrite_segment": validate_rewrite_segment,
    "slides": validate_slides,
    "narration": validate_narration,
    "concept_graph": validate_concept_graph,
    "dialogue_turn": validate_dialogue_turn,
    "mindmap": validate_mindmap,
    "timeline": validate_timeline,
    "mnemonic": validate_mnemonic,
    "illustration_brief": validate_illustration_brief,
    "embedded_question": validate_embedded_question,
    "quiz": validate_quiz,
    "quiz_feedback": validate_quiz_feedback,
}


def validate_payload(task_tag: str, payload: Any, params: dict | None = None) -> list[str]:
    """Run the structural validator for ``task_tag``; unknown tags are rejected."""
    validator = VALIDATORS.get(task_tag)
    if validator is None:
        return [f"unknown task_tag {task_tag!r}"]
    return validator(payload, params or {})
