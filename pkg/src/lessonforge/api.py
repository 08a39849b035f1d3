"""HTTP+JSON session API.

Endpoints:
    POST /sessions                                  create a session
    GET  /sessions/{id}                             session snapshot
    GET  /documents/{id}/views/{view_kind}          learner view (redacted)
    POST /sessions/{id}/events                      append one event
    POST /sessions/{id}/quizzes/{quiz_id}/submit    grade + record a quiz
    GET  /reports/usage                             per-session usage report

Clients send compact event payloads (ids plus answers); the server enriches
them with the canonical objects before they enter the log, so replays stay
self-contained. Learner-facing payloads never include correct_index.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .assessment import QuizResult, grade_quiz, quiz_from_dict, quiz_feedback_text
from .document_model import LearnerProfile
from .errors import (
    InvalidPayload,
    LessonforgeError,
    SequenceGap,
    UnknownDocument,
    UnknownSession,
    ValidationFailure,
)
from .sessions import EVENT_KINDS
from .store import DocumentStore, redact_correct_indices


def _http_status(exc: LessonforgeError) -> int:
    if isinstance(exc, (UnknownDocument, UnknownSession)):
        return 404
    if isinstance(exc, SequenceGap):
        return 409
    return 400


def create_app(store: DocumentStore) -> FastAPI:
    app = FastAPI(title="lessonforge session service")

    @app.exception_handler(LessonforgeError)
    async def handle_domain_error(request: Request, exc: LessonforgeError):
        return JSONResponse(
            status_code=_http_status(exc),
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        profile_raw = body.get("profile") or {}
        document_id = body.get("document_id")
        if not document_id:
            raise InvalidPayload("document_id is required")
        profile = LearnerProfile(
            grade_level=profile_raw.get("grade_level"),
            interest=profile_raw.get("interest", ""),
        )
        session = store.sessions.create(profile, document_id)
        return session.to_dict()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return store.sessions.get(session_id).to_dict()

    @app.get("/documents/{document_id}/views/{view_kind}")
    def get_view(document_id: str, view_kind: str):
        return {"view_kind": view_kind, "payload": store.get_view(document_id, view_kind)}

    def _enrich_payload(document_id: str, kind: str, payload: dict) -> dict:
        """Resolve client ids into the full objects the event fold grades."""
        if kind == "embedded_answered":
            question = store.find_embedded_question(document_id, payload.get("question_id", ""))
            return {"question": question, "option_index": payload.get("option_index")}
        if kind == "timeline_attempted":
            timeline = store.find_timeline(document_id, payload.get("timeline_id", ""))
            return {"timeline": timeline, "submitted_order": payload.get("submitted_order")}
        if kind == "quiz_submitted":
            quiz = store.find_quiz(document_id, payload.get("quiz_id", ""))
            return {"quiz": quiz, "answers": payload.get("answers")}
        return payload

    @app.post("/sessions/{session_id}/events")
    def post_event(session_id: str, body: dict):
        kind = body.get("kind")
        if kind not in EVENT_KINDS:
            raise InvalidPayload(f"kind must be one of {EVENT_KINDS}")
        session = store.sessions.get(session_id)
        payload = _enrich_payload(session.document_id, kind, body.get("payload") or {})
        updated = store.sessions.append_event(
            session_id, kind, payload, seq=body.get("seq")
        )
        event = updated.event_log[-1]
        response = {
            "event": {"seq": event.seq, "kind": event.kind},
            "derived_state": redact_correct_indices(updated.derived_state.to_dict()),
        }
        if kind == "embedded_answered":
            response["grade"] = updated.derived_state.embedded_answers[
                payload["question"]["id"]
            ]
        if kind == "timeline_attempted":
            response["grade"] = updated.derived_state.timeline_attempts[-1]
        return response

    @app.post("/sessions/{session_id}/quizzes/{quiz_id}/submit")
    def submit_quiz(session_id: str, quiz_id: str, body: dict):
        session = store.sessions.get(session_id)
        quiz_dict = store.find_quiz(session.document_id, quiz_id)
        answers = body.get("answers")
        if not isinstance(answers, list):
            raise InvalidPayload("body needs an 'answers' list")
        quiz = quiz_from_dict(quiz_dict)
        try:
            result: QuizResult = grade_quiz(quiz, answers)
        except ValidationFailure as exc:
            raise InvalidPayload(str(exc)) from exc
        store.sessions.append_event(
            session_id,
            "quiz_submitted",
            {"quiz": quiz_dict, "answers": answers},
            seq=body.get("seq"),
        )
        return {
            "quiz_id": quiz_id,
            "result": result.to_dict(),
            "feedback": quiz_feedback_text(result),
        }

    @app.get("/reports/usage")
    def usage():
        from .sessions import usage_report

        return {"sessions": usage_report(store.sessions.list_sessions())}

    return app
