"""Event-sourced learner sessions.

A session is an append-only event log plus a derived state that is a pure
fold over that log. Event payloads are self-contained (a quiz submission
carries the quiz it grades), so replaying a log needs no external lookups
and always reproduces the same state. Persistence is newline-delimited
JSON, one file per session.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

from .assessment import grade_quiz, quiz_from_dict
from .document_model import LearnerProfile
from .errors import (
    InvalidPayload,
    NotAPermutation,
    SequenceGap,
    UnknownDocument,
    UnknownSession,
    ValidationFailure,
)
from .immersive import Timeline, TimelineItem, grade_timeline_submission


class ViewKind(str, Enum):
    immersive = "immersive"
    slides = "slides"
    narrated_slides = "narrated_slides"
    audio_lesson = "audio_lesson"
    mindmap = "mindmap"


EVENT_KINDS = (
    "view_switch",
    "embedded_answered",
    "quiz_submitted",
    "timeline_attempted",
    "section_opened",
)


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    at: float
    kind: str
    payload: dict

    def to_dict(self) -> dict:
        return {"seq": self.seq, "at": self.at, "kind": self.kind, "payload": self.payload}


@dataclass(frozen=True)
class DerivedState:
    current_view: str = ViewKind.immersive.value
    views_visited: frozenset[str] = frozenset({ViewKind.immersive.value})
    embedded_answers: dict = field(default_factory=dict)  # question_id -> {option_index, correct}
    quiz_results: dict = field(default_factory=dict)  # quiz_id -> result dict
    timeline_attempts: tuple = ()
    sections_opened: frozenset[str] = frozenset()

    def to_dict(self) -> dict:
        return {
            "current_view": self.current_view,
            "views_visited": sorted(self.views_visited),
            "embedded_answers": self.embedded_answers,
            "quiz_results": self.quiz_results,
            "timeline_attempts": list(self.timeline_attempts),
            "sections_opened": sorted(self.sections_opened),
        }


def initial_state() -> DerivedState:
    return DerivedState()


def _apply_view_switch(state: DerivedState, payload: dict) -> DerivedState:
    view = payload.get("view")
    if view not in {v.value for v in ViewKind}:
        raise InvalidPayload(f"unknown view kind {view!r}")
    return replace(
        state, current_view=view, views_visited=state.views_visited | {view}
    )


def _apply_embedded_answered(state: DerivedState, payload: dict) -> DerivedState:
    question = payload.get("question")
    index = payload.get("option_index")
    if not isinstance(question, dict) or "correct_index" not in question:
        raise InvalidPayload("embedded_answered payload needs the full question object")
    options = question.get("options")
    if not isinstance(options, list) or not isinstance(index, int) or not 0 <= index < len(options):
        raise InvalidPayload("option_index outside the question's options")
    answers = dict(state.embedded_answers)
    answers[question["id"]] = {
        "option_index": index,
        "correct": index == question["correct_index"],
    }
    return replace(state, embedded_answers=answers)


def _apply_quiz_submitted(state: DerivedState, payload: dict) -> DerivedState:
    try:
        quiz = quiz_from_dict(payload["quiz"])
        result = grade_quiz(quiz, payload["answers"])
    except (KeyError, TypeError, ValidationFailure) as exc:
        raise InvalidPayload(f"quiz_submitted payload invalid: {exc}") from exc
    results = dict(state.quiz_results)
    results[quiz.id] = result.to_dict()
    return replace(state, quiz_results=results)


def _apply_timeline_attempted(state: DerivedState, payload: dict) -> DerivedState:
    try:
        raw = payload["timeline"]
        timeline = Timeline(
            items=tuple(TimelineItem(i["label"], i.get("description", "")) for i in raw["items"]),
            anchor_section=raw["anchor_section"],
            exercise_enabled=raw.get("exercise_enabled", True),
        )
        score = grade_timeline_submission(timeline, payload["submitted_order"])
    except (KeyError, TypeError, NotAPermutation, ValidationFailure) as exc:
        raise InvalidPayload(f"timeline_attempted payload invalid: {exc}") from exc
    attempt = {
        "timeline_id": timeline.id,
        "submitted_order": list(payload["submitted_order"]),
        "score": score,
    }
    return replace(state, timeline_attempts=state.timeline_attempts + (attempt,))


def _apply_section_opened(state: DerivedState, payload: dict) -> DerivedState:
    section_id = payload.get("section_id")
    if not isinstance(section_id, str) or not section_id:
        raise InvalidPayload("section_opened payload needs a section_id")
    return replace(state, sections_opened=state.sections_opened | {section_id})


_APPLIERS = {
    "view_switch": _apply_view_switch,
    "embedded_answered": _apply_embedded_answered,
    "quiz_submitted": _apply_quiz_submitted,
    "timeline_attempted": _apply_timeline_attempted,
    "section_opened": _apply_section_opened,
}


def apply_to_state(state: DerivedState, event: SessionEvent) -> DerivedState:
    if event.kind not in _APPLIERS:
        raise InvalidPayload(f"unknown event kind {event.kind!r}")
    return _APPLIERS[event.kind](state, event.payload)


@dataclass(frozen=True)
class Session:
    id: str
    profile: LearnerProfile
    document_id: str
    created_at: float
    event_log: tuple[SessionEvent, ...] = ()
    derived_state: DerivedState = field(default_factory=initial_state)

    @property
    def last_seq(self) -> int:
        return self.event_log[-1].seq if self.event_log else 0

    @property
    def last_at(self) -> float:
        return self.event_log[-1].at if self.event_log else self.created_at

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "profile": {"grade_level": self.profile.grade_level, "interest": self.profile.interest},
            "document_id": self.document_id,
            "created_at": self.created_at,
            "event_log": [e.to_dict() for e in self.event_log],
            "derived_state": self.derived_state.to_dict(),
        }


def apply_event(session: Session, event: SessionEvent) -> Session:
    """Append one event; seq must be exactly last+1 and time must not go backwards."""
    if event.seq != session.last_seq + 1:
        raise SequenceGap(f"expected seq {session.last_seq + 1}, got {event.seq}")
    if event.at < session.last_at:
        raise InvalidPayload(f"event timestamp {event.at} precedes {session.last_at}")
    new_state = apply_to_state(session.derived_state, event)
    return replace(
        session,
        event_log=session.event_log + (event,),
        derived_state=new_state,
    )


def replay(event_log: list[SessionEvent]) -> DerivedState:
    """Fold the log from the initial state; equals incremental application."""
    state = initial_state()
    expected_seq = 1
    for event in event_log:
        if event.seq != expected_seq:
            raise SequenceGap(f"expected seq {expected_seq}, got {event.seq}")
        state = apply_to_state(state, event)
        expected_seq += 1
    return state


def create_session(
    profile: LearnerProfile,
    document_id: str,
    store: "SessionStore",
    now: float | None = None,
) -> Session:
    """New empty session for a known document; current view starts immersive."""
    if not store.document_exists(document_id):
        raise UnknownDocument(f"no document {document_id!r} in store")
    return Session(
        id=uuid.uuid4().hex,
        profile=profile,
        document_id=document_id,
        created_at=time.time() if now is None else now,
    )


def usage_report(sessions: list[Session]) -> list[dict]:
    """Per-session component usage, mirroring what the session log records."""
    report = []
    for s in sessions:
        non_immersive = s.derived_state.views_visited - {ViewKind.immersive.value}
        report.append(
            {
                "session_id": s.id,
                "document_id": s.document_id,
                "views_visited": sorted(s.derived_state.views_visited),
                "used_any_transformation": bool(non_immersive),
                "used_quiz": bool(s.derived_state.quiz_results),
                "event_count": len(s.event_log),
                "duration_seconds": max(0.0, s.last_at - s.created_at),
            }
        )
    return report


class SessionStore:
    """Disk-backed sessions: one NDJSON file each, single-writer per session.

    The first line is the session header; each further line is one event.
    Loading replays the log, so the derived state never persists — it is
    always recomputed from events.
    """

    def __init__(self, root: Path, document_exists=None):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._document_exists = document_exists or (lambda doc_id: True)
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        self._load_existing()

    def document_exists(self, document_id: str) -> bool:
        return bool(self._document_exists(document_id))

    def _path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.ndjson"

    def _load_existing(self) -> None:
        for path in sorted(self.root.glob("*.ndjson")):
            lines = path.read_text(encoding="utf-8").splitlines()
            if not lines:
                continue
            header = json.loads(lines[0])
            session = Session(
                id=header["id"],
                profile=LearnerProfile(
                    grade_level=header["profile"]["grade_level"],
                    interest=header["profile"]["interest"],
                ),
                document_id=header["document_id"],
                created_at=header["created_at"],
            )
            for line in lines[1:]:
                raw = json.loads(line)
                event = SessionEvent(raw["seq"], raw["at"], raw["kind"], raw["payload"])
                session = apply_event(session, event)
            self._sessions[session.id] = session
            self._locks[session.id] = threading.Lock()

    def create(
        self, profile: LearnerProfile, document_id: str, now: float | None = None
    ) -> Session:
        session = create_session(profile, document_id, self, now=now)
        with self._registry_lock:
            self._sessions[session.id] = session
            self._locks[session.id] = threading.Lock()
        header = {
            "id": session.id,
            "profile": {"grade_level": profile.grade_level, "interest": profile.interest},
            "document_id": document_id,
            "created_at": session.created_at,
        }
        self._path(session.id).write_text(
            json.dumps(header, sort_keys=True) + "\n", encoding="utf-8"
        )
        return session

    def get(self, session_id: str) -> Session:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise UnknownSession(f"no session {session_id!r}") from None

    def list_sessions(self) -> list[Session]:
        return sorted(self._sessions.values(), key=lambda s: (s.created_at, s.id))

    def append_event(
        self,
        session_id: str,
        kind: str,
        payload: dict,
        seq: int | None = None,
        at: float | None = None,
    ) -> Session:
        """Apply and persist one event; serialized per session."""
        lock = self._locks.get(session_id)
        if lock is None:
            raise UnknownSession(f"no session {session_id!r}")
        with lock:
            session = self._sessions[session_id]
            event = SessionEvent(
                seq=session.last_seq + 1 if seq is None else seq,
                at=max(time.time(), session.last_at) if at is None else at,
                kind=kind,
                payload=payload,
            )
            updated = apply_event(session, event)
            with self._path(session_id).open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(event.to_dict(), sort_keys=True) + "\n")
            self._sessions[session_id] = updated
            return updated
