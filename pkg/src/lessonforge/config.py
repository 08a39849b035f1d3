"""Pipeline configuration: tunable thresholds with spec-pinned defaults.

Defaults are the documented acceptance values; everything here can be
overridden from a JSON config file (see :func:`load_config`) or CLI flags.
Unknown keys are rejected at load time.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .serialization import read_json

DEFAULT_INTEREST_CATALOG: tuple[str, ...] = (
    "art",
    "basketball",
    "food",
    "gaming",
    "music",
    "soccer",
    "sports",
)

UNDERGRADUATE = "undergraduate"
UNDERGRADUATE_NUMERIC_GRADE = 13


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs for both generation stages and the assessment layer.

    Attributes:
        relevel_tolerance: accepted |achieved grade - target grade|.
        max_relevel_attempts: full-document releveling attempts before
            keeping the best candidate with accepted=False.
        max_fraction: cap on personalized characters as a fraction of the
            document's characters.
        max_turns: hard cap on dialogue lesson turns.
        coverage_threshold: fraction of concepts a dialogue must reveal.
        max_bullets: per-slide bullet cap.
        words_per_second: narration pace used for estimated_seconds.
        quiz_min_questions / quiz_max_questions: quiz size bounds.
        embedded_per_section: embedded questions generated per section.
        max_addons_per_kind: addon density cap per section and kind.
        interest_catalog: allowed LearnerProfile interests.
    """

    relevel_tolerance: float = 1.5
    max_relevel_attempts: int = 3
    max_fraction: float = 0.30
    max_turns: int = 20
    coverage_threshold: float = 0.9
    max_bullets: int = 5
    words_per_second: float = 2.5
    quiz_min_questions: int = 5
    quiz_max_questions: int = 10
    embedded_per_section: int = 1
    max_addons_per_kind: int = 1
    interest_catalog: tuple[str, ...] = DEFAULT_INTEREST_CATALOG

    def __post_init__(self) -> None:
        if self.relevel_tolerance < 0:
            raise ConfigError("relevel_tolerance must be >= 0")
        if self.max_relevel_attempts < 1:
            raise ConfigError("max_relevel_attempts must be >= 1")
        if not 0 < self.max_fraction <= 1:
            raise ConfigError("max_fraction must be in (0, 1]")
        if self.max_turns < 2:
            raise ConfigError("max_turns must be >= 2")
        if not 0 < self.coverage_threshold <= 1:
            raise ConfigError("coverage_threshold must be in (0, 1]")
        if self.quiz_min_questions < 1 or self.quiz_max_questions < self.quiz_min_questions:
            raise ConfigError("quiz question bounds must satisfy 1 <= min <= max")
        if self.words_per_second <= 0:
            raise ConfigError("words_per_second must be > 0")

    def snapshot(self) -> dict[str, Any]:
        """JSON-safe dump recorded in bundle manifests."""
        out: dict[str, Any] = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


def load_config(path: Path | None = None, overrides: dict[str, Any] | None = None) -> PipelineConfig:
    """Build a config from an optional JSON file plus flag overrides.

    Flags win over file values. Unknown keys in either source raise
    :class:`ConfigError`.
    """
    known = {f.name for f in fields(PipelineConfig)}
    merged: dict[str, Any] = {}
    if path is not None:
        data = read_json(path)
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        merged.update(data)
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(set(merged) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "interest_catalog" in merged:
        merged["interest_catalog"] = tuple(merged["interest_catalog"])
    return replace(PipelineConfig(), **merged)
