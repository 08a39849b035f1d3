from __future__ import annotations

import random
import threading

import pytest

from lessonforge.document_model import LearnerProfile
from lessonforge.errors import InvalidPayload, SequenceGap, UnknownDocument, UnknownSession
from lessonforge.sessions import (
    Session,
    SessionEvent,
    SessionStore,
    ViewKind,
    apply_event,
    create_session,
    initial_state,
    replay,
    usage_report,
)

PROFILE = LearnerProfile(grade_level=7, interest="music")


def _question(ident="q1", correct=1):
    return {
        "id": ident,
        "stem": "which?",
        "options": ["a", "b", "c"],
        "correct_index": correct,
        "difficulty": "easy",
        "topic_tag": "rivers",
        "grounding_ref": "s-1",
    }


def _quiz_dict(ident_prefix="q", n=5):
    return {
        "section_ref": "s-1",
        "questions": [
            {
                "id": f"{ident_prefix}{i}",
                "stem": f"q{i}?",
                "options": ["a", "b", "c"],
                "correct_index": i % 3,
                "difficulty": ["easy", "medium", "hard"][i % 3],
                "topic_tag": ["water", "rocks"][i % 2],
                "grounding_ref": "s-1",
            }
            for i in range(n)
        ],
    }


def _timeline_dict():
    return {
        "items": [
            {"label": "one", "description": ""},
            {"label": "two", "description": ""},
            {"label": "three", "description": ""},
        ],
        "anchor_section": "s-1",
        "exercise_enabled": True,
    }


def _event(seq, kind, payload, at=None):
    return SessionEvent(seq=seq, at=float(seq) if at is None else at, kind=kind, payload=payload)


def _session():
    return Session(id="sess-1", profile=PROFILE, document_id="doc-1", created_at=0.0)


# --- event application ---------------------------------------------------------


def test_initial_state():
    s = _session()
    assert s.derived_state.current_view == "immersive"
    assert s.derived_state.views_visited == frozenset({"immersive"})


def test_view_switch():
    s = apply_event(_session(), _event(1, "view_switch", {"view": "mindmap"}))
    assert s.derived_state.current_view == "mindmap"
    assert s.derived_state.views_visited == frozenset({"immersive", "mindmap"})


def test_view_switch_unknown_view():
    with pytest.raises(InvalidPayload):
        apply_event(_session(), _event(1, "view_switch", {"view": "hologram"}))


def test_quiz_submitted_grades_via_assessment():
    quiz = _quiz_dict(n=8)
    answers = [q["correct_index"] for q in quiz["questions"]]
    answers[0] = (answers[0] + 1) % 3
    answers[1] = (answers[1] + 1) % 3  # 6 of 8 correct
    s = apply_event(_session(), _event(1, "quiz_submitted", {"quiz": quiz, "answers": answers}))
    result = next(iter(s.derived_state.quiz_results.values()))
    assert result["score"] == pytest.approx(0.75)


def test_embedded_answered_grading():
    payload = {"question": _question(correct=2), "option_index": 2}
    s = apply_event(_session(), _event(1, "embedded_answered", payload))
    assert s.derived_state.embedded_answers["q1"]["correct"] is True


def test_timeline_attempt_scoring():
    payload = {"timeline": _timeline_dict(), "submitted_order": ["one", "three", "two"]}
    s = apply_event(_session(), _event(1, "timeline_attempted", payload))
    assert s.derived_state.timeline_attempts[0]["score"] == pytest.approx(1 / 3)


def test_sequence_gap_rejected():
    with pytest.raises(SequenceGap):
        apply_event(_session(), _event(2, "section_opened", {"section_id": "s-1"}))


def test_timestamp_regression_rejected():
    s = apply_event(_session(), _event(1, "section_opened", {"section_id": "s-1"}, at=10.0))
    with pytest.raises(InvalidPayload):
        apply_event(s, _event(2, "section_opened", {"section_id": "s-2"}, at=5.0))


def test_invalid_payload_shapes():
    with pytest.raises(InvalidPayload):
        apply_event(_session(), _event(1, "quiz_submitted", {"quiz": {"bad": 1}, "answers": []}))
    with pytest.raises(InvalidPayload):
        apply_event(_session(), _event(1, "timeline_attempted", {"timeline": _timeline_dict(), "submitted_order": ["one", "one", "two"]}))
    with pytest.raises(InvalidPayload):
        apply_event(_session(), _event(1, "nonsense", {}))


def test_append_only():
    s0 = _session()
    s1 = apply_event(s0, _event(1, "section_opened", {"section_id": "s-1"}))
    s2 = apply_event(s1, _event(2, "view_switch", {"view": "slides"}))
    assert s0.event_log == ()
    assert s1.event_log == s2.event_log[:1]
    assert len(s2.event_log) == 2


# --- replay equivalence ----------------------------------------------------------


def random_event_stream(rng: random.Random, n: int) -> list[SessionEvent]:
    events = []
    at = 0.0
    for seq in range(1, n + 1):
        at += rng.random()
        kind = rng.choice(
            ["view_switch", "embedded_answered", "quiz_submitted", "timeline_attempted", "section_opened"]
        )
        if kind == "view_switch":
            payload = {"view": rng.choice([v.value for v in ViewKind])}
        elif kind == "embedded_answered":
            payload = {
                "question": _question(ident=f"q{rng.randint(1, 9)}", correct=rng.randint(0, 2)),
                "option_index": rng.randint(0, 2),
            }
        elif kind == "quiz_submitted":
            quiz = _quiz_dict(ident_prefix=f"qz{rng.randint(1, 4)}-", n=rng.randint(5, 8))
            payload = {
                "quiz": quiz,
                "answers": [rng.randint(0, 2) for _ in quiz["questions"]],
            }
        elif kind == "timeline_attempted":
            order = ["one", "two", "three"]
            rng.shuffle(order)
            payload = {"timeline": _timeline_dict(), "submitted_order": order}
        else:
            payload = {"section_id": f"s-{rng.randint(1, 5)}"}
        events.append(SessionEvent(seq=seq, at=at, kind=kind, payload=payload))
    return events


def test_replay_equals_incremental():
    rng = random.Random(99)
    events = random_event_stream(rng, 60)
    session = _session()
    for event in events:
        session = apply_event(session, event)
    assert replay(list(events)) == session.derived_state


def test_replay_deterministic():
    events = random_event_stream(random.Random(5), 100)
    assert replay(events) == replay(events)


def test_replay_empty_log():
    assert replay([]) == initial_state()


def test_replay_detects_gap():
    events = random_event_stream(random.Random(1), 5)
    with pytest.raises(SequenceGap):
        replay(events[:2] + events[3:])


# --- store + usage ------------------------------------------------------------------


def test_create_session_requires_document(tmp_path):
    store = SessionStore(tmp_path, document_exists=lambda d: d == "known")
    with pytest.raises(UnknownDocument):
        create_session(PROFILE, "missing", store)
    s1 = store.create(PROFILE, "known")
    s2 = store.create(PROFILE, "known")
    assert s1.id != s2.id


def test_store_persistence_round_trip(tmp_path):
    store = SessionStore(tmp_path)
    s = store.create(PROFILE, "doc-1", now=100.0)
    store.append_event(s.id, "view_switch", {"view": "slides"}, at=101.0)
    store.append_event(s.id, "section_opened", {"section_id": "s-1"}, at=102.0)
    reloaded = SessionStore(tmp_path).get(s.id)
    assert reloaded.derived_state.current_view == "slides"
    assert reloaded.derived_state.sections_opened == frozenset({"s-1"})
    assert reloaded.last_seq == 2


def test_store_unknown_session(tmp_path):
    store = SessionStore(tmp_path)
    with pytest.raises(UnknownSession):
        store.get("missing")
    with pytest.raises(UnknownSession):
        store.append_event("missing", "view_switch", {"view": "slides"})


def test_concurrent_appends_linearized(tmp_path):
    store = SessionStore(tmp_path)
    session = store.create(PROFILE, "doc-1")
    errors = []

    def worker(i):
        try:
            store.append_event(session.id, "section_opened", {"section_id": f"s-{i}"})
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(24)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    final = store.get(session.id)
    assert [e.seq for e in final.event_log] == list(range(1, 25))
    assert replay(list(final.event_log)) == final.derived_state


def test_usage_report_rules(tmp_path):
    store = SessionStore(tmp_path)
    immersive_only = store.create(PROFILE, "doc-1", now=0.0)
    with_views = store.create(PROFILE, "doc-1", now=0.0)
    store.append_event(with_views.id, "view_switch", {"view": "slides"}, at=30.0)
    quiz = _quiz_dict()
    store.append_event(
        with_views.id,
        "quiz_submitted",
        {"quiz": quiz, "answers": [0] * len(quiz["questions"])},
        at=60.0,
    )
    report = {r["session_id"]: r for r in usage_report(store.list_sessions())}
    assert report[immersive_only.id]["used_any_transformation"] is False
    assert report[immersive_only.id]["used_quiz"] is False
    assert report[with_views.id]["used_any_transformation"] is True
    assert report[with_views.id]["used_quiz"] is True
    assert report[with_views.id]["duration_seconds"] == pytest.approx(60.0)


def test_usage_report_majority_cohort(tmp_path):
    store = SessionStore(tmp_path)
    for i in range(10):
        s = store.create(PROFILE, "doc-1", now=0.0)
        if i < 8:
            store.append_event(s.id, "view_switch", {"view": "slides"}, at=1.0)
    rows = usage_report(store.list_sessions())
    used = sum(1 for r in rows if r["used_any_transformation"])
    assert used == 8
    assert used / len(rows) > 0.5
