from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from lessonforge.cli import main
from lessonforge.stats import efficacy_analysis, mann_whitney_u

from .conftest import FIXTURES


@pytest.fixture
def runner():
    return CliRunner()


def _ingest(runner, tmp_path, source: Path) -> str:
    result = runner.invoke(
        main, ["ingest", str(source), "--store", str(tmp_path / "store"), "--format", "json"]
    )
    assert result.exit_code == 0, result.output
    return json.loads(result.output)["document_id"]


def test_ingest_prints_id(runner, tmp_path):
    result = runner.invoke(
        main,
        ["ingest", str(FIXTURES / "forces_motion.txt"), "--store", str(tmp_path / "store")],
    )
    assert result.exit_code == 0
    assert result.output.strip().startswith("doc-")


def test_ingest_missing_file(runner, tmp_path):
    result = runner.invoke(main, ["ingest", str(tmp_path / "nope.txt")])
    assert result.exit_code == 3


def test_ingest_malformed_nesting_reports_line(runner, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("# A\n\nbody\n\n### C\n\nmore\n", encoding="utf-8")
    result = runner.invoke(main, ["ingest", str(bad)])
    assert result.exit_code == 2
    assert "line 5" in result.output


def test_generate_creates_bundle(runner, tmp_path):
    doc_id = _ingest(runner, tmp_path, FIXTURES / "forces_motion.txt")
    result = runner.invoke(
        main,
        [
            "generate", doc_id,
            "--grade", "7", "--interest", "basketball", "--seed", "7",
            "--store", str(tmp_path / "store"), "--format", "json",
        ],
    )
    assert result.exit_code == 0, result.output
    body = json.loads(result.output)
    assert Path(body["bundle_dir"]).is_dir()
    assert body["failures"] == {}
    assert (Path(body["bundle_dir"]) / "manifest.json").exists()


def test_generate_unknown_interest(runner, tmp_path):
    doc_id = _ingest(runner, tmp_path, FIXTURES / "forces_motion.txt")
    result = runner.invoke(
        main,
        [
            "generate", doc_id,
            "--grade", "7", "--interest", "spelunking",
            "--store", str(tmp_path / "store"),
        ],
    )
    assert result.exit_code == 2


def test_generate_unknown_document(runner, tmp_path):
    result = runner.invoke(
        main,
        [
            "generate", "doc-missing",
            "--grade", "7", "--interest", "basketball",
            "--store", str(tmp_path / "store"),
        ],
    )
    assert result.exit_code == 2


def test_generate_deterministic_bundles(runner, tmp_path):
    doc_id = _ingest(runner, tmp_path, FIXTURES / "forces_motion.txt")
    hashes = []
    for _ in range(2):
        result = runner.invoke(
            main,
            [
                "generate", doc_id,
                "--grade", "7", "--interest", "basketball", "--seed", "11",
                "--store", str(tmp_path / "store"), "--format", "json",
            ],
        )
        assert result.exit_code == 0, result.output
        hashes.append(json.loads(result.output)["pdoc_hash"])
        bundle_dir = Path(json.loads(result.output)["bundle_dir"])
        manifest = json.loads((bundle_dir / "manifest.json").read_text())
        hashes.append(json.dumps(manifest["artifacts"], sort_keys=True))
    assert hashes[0::2][0] == hashes[0::2][1]
    assert hashes[1::2][0] == hashes[1::2][1]


def test_eval_rubric_matches_hand_values(runner):
    result = runner.invoke(
        main, ["eval-rubric", str(FIXTURES / "ratings_pedagogy.csv"), "--format", "json"]
    )
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    got = report["per_component_criterion"]["immersive_view"]
    assert got["Accuracy"] == 1.0
    assert got["Coverage"] == 8.5 / 9
    assert got["AdaptabilityPersonalization"] is None
    assert report["per_component_overall"]["immersive_view"]["pooled_mean"] == 59.5 / 76


def test_eval_rubric_text_tables(runner):
    result = runner.invoke(main, ["eval-rubric", str(FIXTURES / "ratings_pedagogy.csv")])
    assert result.exit_code == 0
    assert "High-level metrics" in result.output


def test_eval_rubric_empty_file(runner, tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("component_id,material_id,rater_id,criterion,value\n", encoding="utf-8")
    result = runner.invoke(main, ["eval-rubric", str(empty)])
    assert result.exit_code == 2


def test_eval_efficacy_matches_library(runner):
    a = json.loads((FIXTURES / "scores_group_a.json").read_text())
    b = json.loads((FIXTURES / "scores_group_b.json").read_text())
    expected = efficacy_analysis(a, b, alpha=0.05)
    result = runner.invoke(
        main,
        [
            "eval-efficacy",
            str(FIXTURES / "scores_group_a.json"),
            str(FIXTURES / "scores_group_b.json"),
            "--format", "json",
        ],
    )
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert report["method"] == "mann_whitney"
    assert report["test"]["statistic"] == expected.test.statistic
    assert report["test"]["p_value"] == expected.test.p_value
    assert report["significant"] is True


def test_eval_efficacy_u_matches_oracle(runner, tmp_path):
    from .oracles import mann_whitney_exact_oracle

    a, b = [0.9, 0.8, 0.7], [0.2, 0.3, 0.1, 0.4]
    fa, fb = tmp_path / "a.json", tmp_path / "b.json"
    fa.write_text(json.dumps(a))
    fb.write_text(json.dumps(b))
    mine = mann_whitney_u(a, b)
    u_ref, p_ref = mann_whitney_exact_oracle(a, b)
    assert (mine.statistic, mine.p_value) == (u_ref, pytest.approx(p_ref))


def test_eval_efficacy_missing_file(runner, tmp_path):
    result = runner.invoke(
        main, ["eval-efficacy", str(tmp_path / "a.json"), str(tmp_path / "b.json")]
    )
    assert result.exit_code == 3
