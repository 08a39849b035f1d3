"""On-disk store for documents and generated bundles, plus serving lookups.

Layout under the store root:

    documents/{document_id}.json          canonical ingested document
    bundles/{document_id}/{profile_key}/  one bundle directory per profile
    bundles/{document_id}/ACTIVE          profile key served for the document
    sessions/                             session event logs (NDJSON)

The serving API has no profile parameter, so each document points at one
active bundle; generating a new bundle re-points it.
"""

from __future__ import annotations

from pathlib import Path

from .document_model import SourceDocument, document_from_dict, document_to_dict
from .errors import UnknownDocument, ValidationFailure
from .pipeline import ContentBundle, load_bundle_dir
from .serialization import read_json, write_canonical
from .sessions import SessionStore, ViewKind


def redact_correct_indices(obj):
    """Drop every 'correct_index' key, recursively; learner payloads only."""
    if isinstance(obj, dict):
        return {k: redact_correct_indices(v) for k, v in obj.items() if k != "correct_index"}
    if isinstance(obj, list):
        return [redact_correct_indices(v) for v in obj]
    return obj


class DocumentStore:
    def __init__(self, root: Path):
        self.root = Path(root)
        (self.root / "documents").mkdir(parents=True, exist_ok=True)
        (self.root / "bundles").mkdir(parents=True, exist_ok=True)
        self.sessions = SessionStore(
            self.root / "sessions", document_exists=self.has_document
        )

    # --- documents ---------------------------------------------------------

    def _doc_path(self, document_id: str) -> Path:
        return self.root / "documents" / f"{document_id}.json"

    def put_document(self, doc: SourceDocument) -> str:
        write_canonical(self._doc_path(doc.id), document_to_dict(doc))
        return doc.id

    def has_document(self, document_id: str) -> bool:
        return self._doc_path(document_id).exists()

    def get_document(self, document_id: str) -> SourceDocument:
        path = self._doc_path(document_id)
        if not path.exists():
            raise UnknownDocument(f"no document {document_id!r}")
        return document_from_dict(read_json(path))

    def list_documents(self) -> list[str]:
        return sorted(p.stem for p in (self.root / "documents").glob("*.json"))

    # --- bundles -----------------------------------------------------------

    def bundle_dir(self, document_id: str, profile_key: str) -> Path:
        return self.root / "bundles" / document_id / profile_key

    def save_bundle(
        self, document_id: str, profile_key: str, bundle: ContentBundle
    ) -> Path:
        target = self.bundle_dir(document_id, profile_key)
        bundle.write(target)
        (self.root / "bundles" / document_id / "ACTIVE").write_text(
            profile_key + "\n", encoding="utf-8"
        )
        return target

    def active_bundle(self, document_id: str) -> dict:
        pointer = self.root / "bundles" / document_id / "ACTIVE"
        if not pointer.exists():
            raise UnknownDocument(f"no generated bundle for document {document_id!r}")
        profile_key = pointer.read_text(encoding="utf-8").strip()
        return load_bundle_dir(self.bundle_dir(document_id, profile_key))

    # --- serving lookups ------------------------------------------------------

    def get_view(self, document_id: str, view_kind: str) -> dict:
        """Learner-facing view payload with correct answers redacted."""
        try:
            kind = ViewKind(view_kind)
        except ValueError:
            raise ValidationFailure(f"unknown view kind {view_kind!r}") from None
        bundle = self.active_bundle(document_id)

        def require(name: str) -> dict:
            artifact = bundle.get(name)
            if artifact is None:
                raise UnknownDocument(f"artifact {name!r} missing for {document_id!r}")
            return artifact

        if kind is ViewKind.immersive:
            payload = require("immersive")
        elif kind is ViewKind.slides:
            payload = require("slides")
        elif kind is ViewKind.narrated_slides:
            payload = {"slides": require("slides"), "narration": require("narration")}
        elif kind is ViewKind.audio_lesson:
            payload = require("lesson")
        else:
            payload = require("mindmap")
        return redact_correct_indices(payload)

    def find_quiz(self, document_id: str, quiz_id: str) -> dict:
        """Unredacted quiz for server-side grading."""
        quizzes = self.active_bundle(document_id).get("quizzes") or {}
        for quiz in quizzes.values():
            if quiz["id"] == quiz_id:
                return quiz
        raise UnknownDocument(f"no quiz {quiz_id!r} for document {document_id!r}")

    def find_embedded_question(self, document_id: str, question_id: str) -> dict:
        embedded = self.active_bundle(document_id).get("embedded") or {}
        for questions in embedded.values():
            for q in questions:
                if q["id"] == question_id:
                    return q
        raise UnknownDocument(f"no embedded question {question_id!r}")

    def find_timeline(self, document_id: str, timeline_id: str) -> dict:
        timelines = self.active_bundle(document_id).get("timelines") or []
        for tl in timelines:
            if tl["id"] == timeline_id:
                return tl
        raise UnknownDocument(f"no timeline {timeline_id!r}")
