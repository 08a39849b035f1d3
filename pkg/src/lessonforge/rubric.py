"""Multi-rater rubric scoring over the ten pedagogy criteria.

Ratings arrive one row per (component, material, rater, criterion, value),
with values agree=1.0, neutral/partial=0.5, disagree=0.0, or NA ("can't
assess"). Aggregation excludes NA from numerator and denominator; all-NA
groups are reported as undefined. Reports emit both per-axis means and the
pooled mean, split into the high-level and learning-science metric groups.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .errors import EmptyInput, ValidationFailure

RUBRIC_CRITERIA = (
    "Accuracy",
    "Coverage",
    "Emphasis",
    "Engagement",
    "CognitiveLoad",
    "ActiveLearning",
    "DeepenMetacognition",
    "MotivationCuriosity",
    "AdaptabilityPersonalization",
    "ClarityOfLearningIntentions",
)

HIGH_LEVEL_CRITERIA = ("Accuracy", "Coverage", "Emphasis", "Engagement")
LEARNING_SCIENCE_CRITERIA = (
    "CognitiveLoad",
    "ActiveLearning",
    "DeepenMetacognition",
    "MotivationCuriosity",
    "AdaptabilityPersonalization",
    "ClarityOfLearningIntentions",
)

ALLOWED_VALUES = (1.0, 0.5, 0.0)
NA = "NA"

_VALUE_ALIASES = {
    "1": 1.0,
    "1.0": 1.0,
    "0.5": 0.5,
    ".5": 0.5,
    "0": 0.0,
    "0.0": 0.0,
    "na": NA,
    "n/a": NA,
    "n/a or can't assess": NA,
}


@dataclass(frozen=True)
class Rating:
    component_id: str
    material_id: str
    rater_id: str
    criterion: str
    value: float | str  # 1.0 | 0.5 | 0.0 | "NA"

    def __post_init__(self) -> None:
        if self.criterion not in RUBRIC_CRITERIA:
            raise ValidationFailure(
                f"unknown criterion {self.criterion!r}; expected one of {RUBRIC_CRITERIA}"
            )
        if self.value != NA and self.value not in ALLOWED_VALUES:
            raise ValidationFailure(f"rating value must be 1.0, 0.5, 0.0 or NA, got {self.value!r}")

    @property
    def is_na(self) -> bool:
        return self.value == NA


def parse_value(raw: str | float) -> float | str:
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return float(raw)
    key = str(raw).strip().lower()
    if key in _VALUE_ALIASES:
        return _VALUE_ALIASES[key]
    raise ValidationFailure(f"cannot parse rating value {raw!r}")


def ratings_from_rows(rows: list[dict]) -> list[Rating]:
    return [
        Rating(
            component_id=str(row["component_id"]),
            material_id=str(row["material_id"]),
            rater_id=str(row["rater_id"]),
            criterion=str(row["criterion"]),
            value=parse_value(row["value"]),
        )
        for row in rows
    ]


def ratings_from_csv(text: str) -> list[Rating]:
    reader = csv.DictReader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        raise EmptyInput("ratings file has no rows")
    return ratings_from_rows(rows)


@dataclass(frozen=True)
class AggregateCell:
    mean: float | None  # None marks an all-NA (undefined) group
    n_rated: int
    n_na: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "n_rated": self.n_rated, "n_na": self.n_na}


def aggregate_ratings(
    ratings: list[Rating], group_by: tuple[str, ...]
) -> dict[tuple[str, ...], AggregateCell]:
    """Mean of numeric values per group; NA excluded from both sides of the fraction."""
    valid_dims = ("component_id", "material_id", "rater_id", "criterion")
    for dim in group_by:
        if dim not in valid_dims:
            raise ValidationFailure(f"unknown grouping dimension {dim!r}")
    sums: dict[tuple[str, ...], float] = {}
    counts: dict[tuple[str, ...], int] = {}
    nas: dict[tuple[str, ...], int] = {}
    for r in ratings:
        key = tuple(getattr(r, dim) for dim in group_by)
        if r.is_na:
            nas[key] = nas.get(key, 0) + 1
            sums.setdefault(key, 0.0)
            counts.setdefault(key, 0)
        else:
            sums[key] = sums.get(key, 0.0) + float(r.value)
            counts[key] = counts.get(key, 0) + 1
            nas.setdefault(key, 0)
    return {
        key: AggregateCell(
            mean=(sums[key] / counts[key]) if counts[key] else None,
            n_rated=counts[key],
            n_na=nas[key],
        )
        for key in sums
    }


def rubric_report(ratings: list[Rating]) -> dict:
    """Full aggregation: per component x criterion, per criterion, per component.

    Per-component "overall" is emitted both ways — as the mean of per-axis
    means and as the pooled mean over raw ratings — since either aggregation
    is defensible.
    """
    if not ratings:
        raise EmptyInput("no ratings to aggregate")
    by_cc = aggregate_ratings(ratings, ("component_id", "criterion"))
    by_criterion = aggregate_ratings(ratings, ("criterion",))
    by_component = aggregate_ratings(ratings, ("component_id",))
    components = sorted({r.component_id for r in ratings})

    table: dict[str, dict[str, float | None]] = {}
    for component in components:
        table[component] = {}
        for criterion in RUBRIC_CRITERIA:
            cell = by_cc.get((component, criterion))
            table[component][criterion] = cell.mean if cell else None

    per_component = {}
    for component in components:
        axis_means = [m for m in table[component].values() if m is not None]
        per_component[component] = {
            "per_axis_mean": sum(axis_means) / len(axis_means) if axis_means else None,
            "pooled_mean": by_component[(component,)].mean,
        }

    return {
        "components": components,
        "criteria": list(RUBRIC_CRITERIA),
        "groups": {
            "high_level": list(HIGH_LEVEL_CRITERIA),
            "learning_science": list(LEARNING_SCIENCE_CRITERIA),
        },
        "per_component_criterion": table,
        "per_criterion_overall": {
            c: by_criterion[(c,)].mean if (c,) in by_criterion else None
            for c in RUBRIC_CRITERIA
        },
        "per_component_overall": per_component,
    }


def _format_cell(value: float | None) -> str:
    return "  n/a" if value is None else f"{value:5.2f}"


def render_report_tables(report: dict) -> str:
    """Aligned-text tables, one per metric group (components as rows)."""
    lines: list[str] = []
    components = report["components"]
    for group_name, criteria in (
        ("High-level metrics", report["groups"]["high_level"]),
        ("Learning-science metrics", report["groups"]["learning_science"]),
    ):
        lines.append(group_name)
        width = max((len(c) for c in components), default=9)
        width = max(width, len("component"))
        header = "component".ljust(width) + "".join(f"  {c[:12]:>12}" for c in criteria)
        lines.append(header)
        lines.append("-" * len(header))
        for component in components:
            row = component.ljust(width)
            for criterion in criteria:
                row += f"  {_format_cell(report['per_component_criterion'][component][criterion]):>12}"
            lines.append(row)
        lines.append("")
    lines.append("Overall per component (per-axis mean / pooled mean)")
    for component in components:
        overall = report["per_component_overall"][component]
        lines.append(
            f"  {component}: {_format_cell(overall['per_axis_mean']).strip()}"
            f" / {_format_cell(overall['pooled_mean']).strip()}"
        )
    return "\n".join(lines)
