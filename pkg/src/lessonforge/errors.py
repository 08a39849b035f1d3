"""Exception hierarchy shared across the package.

Every error raised by library code derives from :class:`LessonforgeError`
so callers (and the CLI) can map failure classes to exit codes without
string matching.
"""

from __future__ import annotations


class LessonforgeError(Exception):
    """Base class for all package errors."""


# --- validation-class errors ------------------------------------------------

class ValidationFailure(LessonforgeError):
    """Bad caller input: malformed documents, profiles, answers, ranges."""


class EmptyInput(ValidationFailure):
    pass


class MalformedHeadingNesting(ValidationFailure):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptySection(ValidationFailure):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyText(ValidationFailure):
    pass


class InvalidProfile(ValidationFailure):
    pass


class NotAPermutation(ValidationFailure):
    pass


class AnswerShapeMismatch(ValidationFailure):
    pass


class IndexOutOfBounds(ValidationFailure):
    pass


class DanglingAnchor(ValidationFailure):
    pass


class UnknownNode(ValidationFailure):
    pass


class UnknownDocument(ValidationFailure):
    pass


class UnknownSession(ValidationFailure):
    pass


class SequenceGap(ValidationFailure):
    pass


class InvalidPayload(ValidationFailure):
    pass


class SampleSizeOutOfRange(ValidationFailure):
    pass


class ZeroVariance(ValidationFailure):
    """Degenerate sample: all values identical where spread is required."""


class ConfigError(ValidationFailure):
    pass


# --- provider-class errors --------------------------------------------------

class ProviderError(LessonforgeError):
    """Failures attributable to a generation provider."""


class ProviderUnavailable(ProviderError):
    pass


class ProviderTimeout(ProviderError):
    pass


class SchemaViolationExhausted(ProviderError):
    """Provider never produced a payload passing validation.

    Carries the per-attempt diagnostics so callers can see every violation
    that was fed back into the retry loop.
    """

    def __init__(self, task_tag: str, attempts: list[list[str]]):
        self.task_tag = task_tag
        self.attempts = attempts
        lines = "; ".join(
            f"attempt {i + 1}: {', '.join(v)}" for i, v in enumerate(attempts)
        )
        super().__init__(f"{task_tag}: all {len(attempts)} attempts invalid ({lines})")


class IsolationViolation(LessonforgeError):
    """A persona-scoped request contained text it must not see."""
