"""lessonforge: turn source-of-truth text into a personalized, assessable lesson.

The pipeline personalizes material once (grade releveling plus focused
interest rewriting), then expands that single personalized document into
slides with narration, a two-persona dialogue lesson, a mind map, and an
immersive text interleaved with timelines, mnemonics, illustrations, and
assessments. A statistics kernel covers rubric aggregation and the
normality-gated rank test used for efficacy comparisons.
"""

__version__ = "0.1.0"

from .config import PipelineConfig, load_config
from .document_model import (
    Block,
    BlockKind,
    LearnerProfile,
    Section,
    SourceDocument,
    flatten_text,
    ingest,
    numeric_grade,
    to_source_text,
)
from .gateway import (
    Gateway,
    GenerationRequest,
    GenerationResponse,
    Persona,
    ProviderConfig,
    TaskTag,
    assert_persona_isolation,
    generate,
)
from .personalization import (
    PersonalizationSpan,
    PersonalizedDocument,
    personalize,
    relevel,
    select_personalizable_segments,
)
from .pipeline import ContentBundle, run_pipeline
from .readability import ReadabilityStats, fkg_from_counts, readability
from .stats import (
    EfficacyReport,
    RankData,
    TestResult,
    efficacy_analysis,
    mann_whitney_u,
    rank_with_ties,
    shapiro_wilk,
)

__all__ = [
    "Block",
    "BlockKind",
    "ContentBundle",
    "EfficacyReport",
    "Gateway",
    "GenerationRequest",
    "GenerationResponse",
    "LearnerProfile",
    "Persona",
    "PersonalizationSpan",
    "PersonalizedDocument",
    "PipelineConfig",
    "ProviderConfig",
    "RankData",
    "ReadabilityStats",
    "Section",
    "SourceDocument",
    "TaskTag",
    "TestResult",
    "assert_persona_isolation",
    "efficacy_analysis",
    "fkg_from_counts",
    "flatten_text",
    "generate",
    "ingest",
    "load_config",
    "mann_whitney_u",
    "numeric_grade",
    "personalize",
    "rank_with_ties",
    "readability",
    "relevel",
    "run_pipeline",
    "select_personalizable_segments",
    "shapiro_wilk",
    "to_source_text",
]
