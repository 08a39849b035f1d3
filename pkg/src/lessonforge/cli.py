"""Operator CLI: ingestion, generation, evaluation, serving.

Exit codes: 0 success, 2 validation failures (bad input, bad flags),
3 I/O failures (missing files, unreadable store), 4 provider failures.
Every command accepts --format=json for machine-readable output.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import load_config
from .document_model import LearnerProfile, ingest
from .errors import ProviderError, ValidationFailure
from .gateway import Gateway, ProviderConfig
from .pipeline import run_pipeline
from .rubric import ratings_from_csv, ratings_from_rows, render_report_tables, rubric_report
from .serialization import canonical_dumps, read_json
from .stats import efficacy_analysis
from .store import DocumentStore

EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_PROVIDER = 4


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guarded(fn):
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationFailure as exc:
            _fail(str(exc), EXIT_VALIDATION)
        except ProviderError as exc:
            _fail(str(exc), EXIT_PROVIDER)
        except OSError as exc:
            _fail(str(exc), EXIT_IO)

    wrapper.__name__ = fn.__name__
    return wrapper


def _emit(payload: dict, fmt: str, text_lines: list[str]) -> None:
    if fmt == "json":
        click.echo(canonical_dumps(payload), nl=False)
    else:
        for line in text_lines:
            click.echo(line)


@click.group()
def main() -> None:
    """Transform source text into personalized, assessable lesson bundles."""


@main.command(name="ingest")
@click.argument("path", type=click.Path(path_type=Path))
@click.option("--store", "store_dir", type=click.Path(path_type=Path), default="store")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
@_guarded
def ingest_cmd(path: Path, store_dir: Path, fmt: str) -> None:
    """Ingest a heading-marked text file into the document store."""
    if not path.exists():
        _fail(f"input file not found: {path}", EXIT_IO)
    doc = ingest(path.read_text(encoding="utf-8"), source_uri=str(path))
    store = DocumentStore(store_dir)
    store.put_document(doc)
    _emit(
        {"document_id": doc.id, "title": doc.title, "sections": len(doc.sections)},
        fmt,
        [doc.id],
    )


@main.command()
@click.argument("document_id")
@click.option("--grade", required=True, help="1-12 or 'undergraduate'")
@click.option("--interest", required=True)
@click.option("--seed", type=int, default=0)
@click.option("--store", "store_dir", type=click.Path(path_type=Path), default="store")
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
@click.option("--provider", type=click.Choice(["mock", "remote"]), default="mock")
@click.option("--endpoint", default=None, help="remote provider URL")
@click.option("--mock-script", type=click.Path(path_type=Path), default=None)
@click.option("--max-parallel", type=int, default=4)
@click.option("--sequential", is_flag=True, help="run stage-2 generators one by one")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
@_guarded
def generate(
    document_id: str,
    grade: str,
    interest: str,
    seed: int,
    store_dir: Path,
    config_path: Path | None,
    provider: str,
    endpoint: str | None,
    mock_script: Path | None,
    max_parallel: int,
    sequential: bool,
    fmt: str,
) -> None:
    """Run the two-stage pipeline for one document and learner profile."""
    store = DocumentStore(store_dir)
    doc = store.get_document(document_id)
    cfg = load_config(config_path)
    grade_level: int | str = int(grade) if grade.isdigit() else grade
    profile = LearnerProfile(grade_level=grade_level, interest=interest)
    profile.validate(cfg.interest_catalog)
    script = None
    if mock_script is not None:
        if not mock_script.exists():
            _fail(f"mock script not found: {mock_script}", EXIT_IO)
        script = read_json(mock_script)
    gateway = Gateway(
        ProviderConfig(kind=provider, endpoint=endpoint, max_parallel=max_parallel),
        script=script,
    )
    bundle = run_pipeline(
        doc, profile, gateway, cfg, seed=seed, concurrent=not sequential
    )
    target = store.save_bundle(document_id, profile.key(), bundle)
    _emit(
        {
            "bundle_dir": str(target),
            "pdoc_hash": bundle.manifest["pdoc_hash"],
            "failures": bundle.failures,
            "relevel": bundle.pdoc.relevel_report.to_dict(),
        },
        fmt,
        [str(target)]
        + [f"warning: {name} failed: {err}" for name, err in bundle.failures.items()],
    )


@main.command(name="eval-rubric")
@click.argument("ratings_path", type=click.Path(path_type=Path))
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
@_guarded
def eval_rubric(ratings_path: Path, fmt: str) -> None:
    """Aggregate a rubric ratings file (CSV or JSON rows)."""
    if not ratings_path.exists():
        _fail(f"ratings file not found: {ratings_path}", EXIT_IO)
    text = ratings_path.read_text(encoding="utf-8")
    if ratings_path.suffix.lower() == ".json":
        ratings = ratings_from_rows(json.loads(text))
    else:
        ratings = ratings_from_csv(text)
    report = rubric_report(ratings)
    _emit(report, fmt, [render_report_tables(report)])


def _read_scores(path: Path) -> list[float]:
    if not path.exists():
        _fail(f"scores file not found: {path}", EXIT_IO)
    text = path.read_text(encoding="utf-8").strip()
    if not text:
        raise ValidationFailure(f"scores file {path} is empty")
    if path.suffix.lower() == ".json":
        data = json.loads(text)
        return [float(v) for v in data]
    return [float(line) for line in text.splitlines() if line.strip()]


@main.command(name="eval-efficacy")
@click.argument("scores_a", type=click.Path(path_type=Path))
@click.argument("scores_b", type=click.Path(path_type=Path))
@click.option("--alpha", type=float, default=0.05)
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
@_guarded
def eval_efficacy(scores_a: Path, scores_b: Path, alpha: float, fmt: str) -> None:
    """Normality-gated two-group comparison of score files."""
    a = _read_scores(scores_a)
    b = _read_scores(scores_b)
    report = efficacy_analysis(a, b, alpha=alpha)
    lines = [
        f"group means: {report.mean_a:.4f} vs {report.mean_b:.4f}",
        f"normality p-values: {report.shapiro_a.p_value:.4g}, {report.shapiro_b.p_value:.4g}",
        f"method: {report.method}",
    ]
    if report.test is not None:
        lines.append(
            f"U = {report.test.statistic:.4g} ({report.test.method}), p = {report.test.p_value:.4g}"
        )
        lines.append(f"significant at alpha={alpha}: {report.significant}")
    else:
        lines.append(report.note)
    _emit(report.to_dict(), fmt, lines)


@main.command()
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--store", "store_dir", type=click.Path(path_type=Path), default="store")
@_guarded
def serve(port: int, host: str, store_dir: Path) -> None:
    """Run the session service until interrupted."""
    import uvicorn

    from .api import create_app

    app = create_app(DocumentStore(store_dir))
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
