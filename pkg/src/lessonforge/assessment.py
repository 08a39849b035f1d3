"""Embedded questions and section quizzes, with grading and glows/grows feedback.

Generation is grounded: a question's stem must share a content word with
its anchor text, enforced through the gateway retry loop. Grading is pure
and reentrant.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .config import PipelineConfig
from .errors import AnswerShapeMismatch, IndexOutOfBounds, ValidationFailure
from .gateway import Gateway, GenerationRequest, TaskTag
from .personalization import PersonalizedDocument

_GROUNDING_STOPWORDS = frozenset(
    "the a an and or but of to in on for with by is are was were this that "
    "which what how about best match matches statement material part does".split()
)


@dataclass(frozen=True)
class MCQuestion:
    id: str
    stem: str
    options: tuple[str, ...]
    correct_index: int
    difficulty: str
    topic_tag: str
    grounding_ref: str

    def __post_init__(self) -> None:
        if not 0 <= self.correct_index < len(self.options):
            raise ValidationFailure("correct_index outside option bounds")
        if len(set(self.options)) != len(self.options):
            raise ValidationFailure("options must be pairwise distinct")

    def to_dict(self, redact: bool = False) -> dict:
        data = {
            "id": self.id,
            "stem": self.stem,
            "options": list(self.options),
            "difficulty": self.difficulty,
            "topic_tag": self.topic_tag,
            "grounding_ref": self.grounding_ref,
        }
        if not redact:
            data["correct_index"] = self.correct_index
        return data


@dataclass(frozen=True)
class Quiz:
    section_ref: str
    questions: tuple[MCQuestion, ...]

    def __post_init__(self) -> None:
        if not 5 <= len(self.questions) <= 10:
            raise ValidationFailure(f"quiz must hold 5-10 questions, got {len(self.questions)}")
        if len({q.difficulty for q in self.questions}) < 2:
            raise ValidationFailure("quiz must mix at least 2 difficulty levels")

    @property
    def id(self) -> str:
        key = self.section_ref + "|" + "|".join(q.id for q in self.questions)
        return "qz-" + hashlib.sha256(key.encode("utf-8")).hexdigest()[:10]

    def to_dict(self, redact: bool = False) -> dict:
        return {
            "id": self.id,
            "section_ref": self.section_ref,
            "questions": [q.to_dict(redact=redact) for q in self.questions],
        }


def quiz_from_dict(data: dict) -> Quiz:
    return Quiz(
        section_ref=data["section_ref"],
        questions=tuple(
            MCQuestion(
                id=q["id"],
                stem=q["stem"],
                options=tuple(q["options"]),
                correct_index=q["correct_index"],
                difficulty=q["difficulty"],
                topic_tag=q["topic_tag"],
                grounding_ref=q["grounding_ref"],
            )
            for q in data["questions"]
        ),
    )


@dataclass(frozen=True)
class QuizResult:
    score: float
    per_question: tuple[bool, ...]
    glows: tuple[str, ...]
    grows: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "per_question": list(self.per_question),
            "glows": list(self.glows),
            "grows": list(self.grows),
        }


def _content_words(text: str) -> set[str]:
    cleaned = "".join(c if c.isalnum() else " " for c in text.casefold())
    return {w for w in cleaned.split() if len(w) >= 3 and w not in _GROUNDING_STOPWORDS}


def _grounding_validator(anchor_text: str):
    anchor_words = _content_words(anchor_text)

    def check(payload) -> list[str]:
        questions = payload["questions"] if "questions" in payload else [payload]
        out = []
        for i, q in enumerate(questions):
            if not (_content_words(q["stem"]) & anchor_words):
                out.append(f"question {i}: stem shares no content word with the anchor text")
        return out

    return check


def _question_id(grounding_ref: str, stem: str, options: list[str]) -> str:
    key = grounding_ref + "|" + stem + "|" + "|".join(options)
    return "mcq-" + hashlib.sha256(key.encode("utf-8")).hexdigest()[:10]


def _build_question(payload: dict, grounding_ref: str) -> MCQuestion:
    return MCQuestion(
        id=_question_id(grounding_ref, payload["stem"], payload["options"]),
        stem=payload["stem"],
        options=tuple(payload["options"]),
        correct_index=payload["correct_index"],
        difficulty=payload["difficulty"],
        topic_tag=payload["topic_tag"],
        grounding_ref=grounding_ref,
    )


def generate_embedded_question(
    anchor_id: str,
    pdoc: PersonalizedDocument,
    gateway: Gateway,
    cfg: PipelineConfig,
    seed: int = 0,
) -> MCQuestion:
    """One grounded multiple-choice question for a block or section anchor."""
    try:
        anchor_text = pdoc.final_section_text(anchor_id)
    except KeyError:
        try:
            anchor_text = pdoc.final_block_text(anchor_id)
        except KeyError:
            raise ValidationFailure(f"anchor {anchor_id!r} not found") from None
    request = GenerationRequest(
        task_tag=TaskTag.embedded_question,
        context_parts=(
            ("task", "Write one multiple-choice question tied to this exact passage."),
            ("anchor_id", anchor_id),
            ("anchor_text", anchor_text),
        ),
        seed=seed,
    )
    response = gateway.generate(request, extra_validator=_grounding_validator(anchor_text))
    return _build_question(response.payload, anchor_id)


def generate_quiz(
    section_ref: str,
    pdoc: PersonalizedDocument,
    gateway: Gateway,
    cfg: PipelineConfig,
    seed: int = 0,
) -> Quiz:
    """Section quiz of 5-10 grounded questions spanning 2+ difficulty levels."""
    try:
        section = pdoc.base.section_by_id(section_ref)
    except KeyError:
        raise ValidationFailure(f"unknown section {section_ref!r}") from None
    section_text = pdoc.final_section_text(section_ref)
    request = GenerationRequest(
        task_tag=TaskTag.quiz,
        context_parts=(
            ("task", "Write a section quiz grounded in all of this material."),
            ("section_id", section_ref),
            ("section_heading", section.heading),
            ("section_text", section_text),
        ),
        params={
            "min_questions": cfg.quiz_min_questions,
            "max_questions": cfg.quiz_max_questions,
        },
        seed=seed,
    )
    response = gateway.generate(request, extra_validator=_grounding_validator(section_text))
    return Quiz(
        section_ref=section_ref,
        questions=tuple(_build_question(q, section_ref) for q in response.payload["questions"]),
    )


def grade_quiz(quiz: Quiz, answers: list[int]) -> QuizResult:
    """Score plus glows (tags answered fully correctly) and grows (tags missed)."""
    if len(answers) != len(quiz.questions):
        raise AnswerShapeMismatch(
            f"expected {len(quiz.questions)} answers, got {len(answers)}"
        )
    for i, a in enumerate(answers):
        if not isinstance(a, int) or not 0 <= a < len(quiz.questions[i].options):
            raise AnswerShapeMismatch(f"answer {i} out of bounds")
    flags = tuple(a == q.correct_index for q, a in zip(quiz.questions, answers))
    by_tag: dict[str, list[bool]] = {}
    for q, ok in zip(quiz.questions, flags):
        by_tag.setdefault(q.topic_tag, []).append(ok)
    glows = tuple(sorted(tag for tag, oks in by_tag.items() if all(oks)))
    grows = tuple(sorted(tag for tag, oks in by_tag.items() if not all(oks)))
    return QuizResult(
        score=sum(flags) / len(flags),
        per_question=flags,
        glows=glows,
        grows=grows,
    )


def grade_embedded(
    question: MCQuestion,
    answer_index: int,
    gateway: Gateway | None = None,
    seed: int = 0,
) -> dict:
    """Immediate feedback for one answered embedded question.

    Feedback text is templated; a gateway, when provided, may replace it via
    the quiz_feedback tag (template remains the mandatory fallback).
    """
    if not isinstance(answer_index, int) or not 0 <= answer_index < len(question.options):
        raise IndexOutOfBounds(
            f"answer index {answer_index} outside 0..{len(question.options) - 1}"
        )
    correct = answer_index == question.correct_index
    if correct:
        feedback = f"Correct: {question.options[question.correct_index]}"
    else:
        feedback = (
            f"Not quite. Look again at the material on {question.topic_tag}; "
            f"the key point is: {question.options[question.correct_index]}"
        )
    if gateway is not None:
        request = GenerationRequest(
            task_tag=TaskTag.quiz_feedback,
            context_parts=(
                ("task", "Give one short, encouraging feedback line for this answer."),
                (
                    "result",
                    json.dumps(
                        {"correct": correct, "topic": question.topic_tag}, ensure_ascii=False
                    ),
                ),
            ),
            seed=seed,
        )
        try:
            feedback = gateway.generate(request).payload["text"]
        except Exception:
            pass  # template fallback is mandatory
    return {"correct": correct, "feedback": feedback}


def quiz_feedback_text(
    result: QuizResult, gateway: Gateway | None = None, seed: int = 0
) -> str:
    """Overall assessment line; generative when a gateway is given, templated otherwise."""
    glows = ", ".join(result.glows) or "none yet"
    grows = ", ".join(result.grows) or "nothing, great work"
    text = (
        f"You scored {round(result.score * 100)} percent. "
        f"Strengths: {glows}. Focus next on: {grows}."
    )
    if gateway is not None:
        request = GenerationRequest(
            task_tag=TaskTag.quiz_feedback,
            context_parts=(
                ("task", "Summarize this quiz outcome with strengths and growth areas."),
                ("result", json.dumps(result.to_dict(), ensure_ascii=False)),
            ),
            seed=seed,
        )
        try:
            text = gateway.generate(request).payload["text"]
        except Exception:
            pass
    return text
