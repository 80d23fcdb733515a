"""End-to-end runs of the command line, exercising every subcommand."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import pytest

from ranwatch.cli import EXIT_CONFIG, EXIT_DATA, EXIT_DEGRADED, EXIT_OK, main
from ranwatch.store import read_records


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _read_tsv(path: Path) -> tuple[list[str], list[list[str]]]:
    lines = path.read_text(encoding="utf-8").splitlines()
    header = lines[0].split("\t")
    return header, [line.split("\t") for line in lines[1:]]


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Run the whole chain once on the built-in demo scenario."""
    root = tmp_path_factory.mktemp("pipeline")
    paths = {
        "corpus": root / "corpus",
        "records": root / "records.jsonl",
        "features": root / "features.jsonl",
        "rows": root / "rows.jsonl",
        "decomp": root / "decomposition.tsv",
        "baseline": root / "baseline.json",
        "baseline_metrics": root / "baseline_metrics.tsv",
        "analysis": root / "analysis",
        "risk": root / "risk.json",
        "risk_metrics": root / "risk_metrics.tsv",
        "scores": root / "scores.tsv",
        "report": root / "report",
    }
    codes = {}
    codes["synth"] = main(["synth", "--out", str(paths["corpus"])])
    dataset = paths["corpus"] / "dataset"
    commits = paths["corpus"] / "commits.jsonl"
    codes["ingest"] = main(
        ["ingest", "--dataset", str(dataset), "--commits", str(commits), "--out", str(paths["records"])]
    )
    codes["categorize"] = main(
        ["categorize", "--commits", str(commits), "--out", str(paths["features"])]
    )
    codes["assemble"] = main(
        [
            "assemble",
            "--records", str(paths["records"]),
            "--features", str(paths["features"]),
            "--commits", str(commits),
            "--out", str(paths["rows"]),
        ]
    )
    codes["decompose"] = main(["decompose", "--rows", str(paths["rows"]), "--out", str(paths["decomp"])])
    codes["train-baseline"] = main(
        [
            "train-baseline",
            "--rows", str(paths["rows"]),
            "--out", str(paths["baseline"]),
            "--metrics", str(paths["baseline_metrics"]),
        ]
    )
    codes["analyze"] = main(
        ["analyze", "--rows", str(paths["rows"]), "--out-dir", str(paths["analysis"])]
    )
    codes["train-risk"] = main(
        [
            "train-risk",
            "--rows", str(paths["rows"]),
            "--labels", str(paths["analysis"] / "labels.jsonl"),
            "--out", str(paths["risk"]),
            "--metrics", str(paths["risk_metrics"]),
        ]
    )
    codes["score"] = main(
        [
            "score",
            "--model", str(paths["risk"]),
            "--features", str(paths["features"]),
            "--out", str(paths["scores"]),
        ]
    )
    codes["report"] = main(
        ["report", "--labels", str(paths["analysis"] / "labels.jsonl"), "--out-dir", str(paths["report"])]
    )
    return {"paths": paths, "codes": codes, "root": root}


def test_stage_exit_codes(pipeline):
    codes = pipeline["codes"]
    for stage, code in codes.items():
        if stage == "analyze":
            continue
        assert code == EXIT_OK, stage
    # the demo scenario plants two regressions, so analyze must signal them
    assert codes["analyze"] == EXIT_DEGRADED


def test_rollup_flags_exactly_the_planted_commits(pipeline):
    header, rows = _read_tsv(pipeline["paths"]["analysis"] / "commit_rollup.tsv")
    verdicts = {row[header.index("commit_hash")]: row[header.index("verdict")] for row in rows}
    assert sorted(verdicts.values()).count("degraded") == 2
    marks = read_records(pipeline["paths"]["corpus"] / "truth_commits.jsonl", kind="truth_commit")
    injected = {m["hash"] for m in marks if m["injected"]}
    assert {h for h, v in verdicts.items() if v == "degraded"} == injected


def test_categorize_output_shape(pipeline):
    features = read_records(pipeline["paths"]["features"], kind="commit_features")
    assert len(features) == 12
    for record in features:
        # without a refiner the only statuses are the keyword short-circuit
        # for high confidence and the explicit no-client marker
        assert record["status"] in ("keyword_high", "not_refined")
        assert record["confidence"] in ("high", "medium", "low")
    status = read_records(pipeline["paths"]["features"], kind="categorize_status")
    assert len(status) == 1
    assert status[0]["n_commits"] == 12
    assert not status[0]["degraded_mode"]


def test_decompose_table_is_sane(pipeline):
    header, rows = _read_tsv(pipeline["paths"]["decomp"])
    assert header[:3] == ["factor", "target", "score"]
    shares = {}
    for row in rows:
        entry = dict(zip(header, row))
        shares[(entry["factor"], entry["target"])] = float(entry["score"])
    assert set(f for f, _ in shares) == {"channel", "load", "code"}
    assert set(t for _, t in shares) == {"efficiency", "packet_loss", "jitter"}
    for value in shares.values():
        assert -0.5 <= value <= 1.0 + 1e-9
    # the planted regressions leave a visible code share on efficiency
    assert shares[("code", "efficiency")] > 0.1


def test_score_table_sorted_by_risk(pipeline):
    header, rows = _read_tsv(pipeline["paths"]["scores"])
    risk_col = header.index("risk")
    risks = [float(row[risk_col]) for row in rows]
    assert len(risks) == 12
    assert risks == sorted(risks, reverse=True)
    assert all(0.0 <= r <= 1.0 for r in risks)


def test_report_files(pipeline):
    report_dir = pipeline["paths"]["report"]
    summary = (report_dir / "summary.txt").read_text(encoding="utf-8")
    assert "degraded" in summary
    header, rows = _read_tsv(report_dir / "floor_tradeoff.tsv")
    assert rows and "floor" in header


def test_reruns_are_byte_identical(pipeline, tmp_path):
    paths = pipeline["paths"]
    corpus2 = tmp_path / "corpus"
    assert main(["synth", "--out", str(corpus2)]) == EXIT_OK
    assert _digest(corpus2 / "commits.jsonl") == _digest(paths["corpus"] / "commits.jsonl")

    records2 = tmp_path / "records.jsonl"
    code = main(
        [
            "ingest",
            "--dataset", str(paths["corpus"] / "dataset"),
            "--commits", str(paths["corpus"] / "commits.jsonl"),
            "--out", str(records2),
        ]
    )
    assert code == EXIT_OK
    assert _digest(records2) == _digest(paths["records"])

    analysis2 = tmp_path / "analysis"
    code = main(["analyze", "--rows", str(paths["rows"]), "--out-dir", str(analysis2)])
    assert code == EXIT_DEGRADED
    for name in (
        "labels.jsonl",
        "residual_summary.tsv",
        "layer_impact.tsv",
        "commit_rollup.tsv",
        "residual_hist.tsv",
        "temporal_comparison.tsv",
    ):
        assert _digest(analysis2 / name) == _digest(paths["analysis"] / name), name


def test_analyze_is_quiet_on_clean_data(tmp_path):
    scenario = tmp_path / "scenario.json"
    scenario.write_text(
        json.dumps(
            {"seed": 5, "n_commits": 12, "tests_per_commit": 6, "sinr_range": [8.0, 30.0]}
        ),
        encoding="utf-8",
    )
    corpus = tmp_path / "corpus"
    assert main(["synth", "--scenario", str(scenario), "--out", str(corpus)]) == EXIT_OK
    records = tmp_path / "records.jsonl"
    features = tmp_path / "features.jsonl"
    rows = tmp_path / "rows.jsonl"
    commits = corpus / "commits.jsonl"
    assert main(["ingest", "--dataset", str(corpus / "dataset"), "--commits", str(commits), "--out", str(records)]) == EXIT_OK
    assert main(["categorize", "--commits", str(commits), "--out", str(features)]) == EXIT_OK
    assert main(["assemble", "--records", str(records), "--features", str(features), "--commits", str(commits), "--out", str(rows)]) == EXIT_OK
    code = main(["analyze", "--rows", str(rows), "--out-dir", str(tmp_path / "analysis")])
    assert code == EXIT_OK


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main([]) == EXIT_CONFIG
    assert main(["no-such-command"]) == EXIT_CONFIG
    assert main(["ingest", "--dataset", str(tmp_path)]) == EXIT_CONFIG  # --out missing
    commits = tmp_path / "commits.jsonl"
    commits.write_text(
        json.dumps(
            {
                "kind": "commit",
                "schema_version": 1,
                "hash": "a" * 40,
                "deploy_time": "2025-01-06T06:00:00",
                "message": "fix mutex in scheduler",
                "files_changed": 1,
                "lines_added": 2,
                "lines_deleted": 0,
            }
        )
        + "\n",
        encoding="utf-8",
    )
    code = main(
        ["categorize", "--commits", str(commits), "--out", str(tmp_path / "f.jsonl"), "--refine", "bogus"]
    )
    assert code == EXIT_CONFIG
    capsys.readouterr()


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert main(["analyze", "--help"]) == 0
    capsys.readouterr()


def test_missing_input_exits_1(tmp_path):
    code = main(["ingest", "--dataset", str(tmp_path / "nope"), "--out", str(tmp_path / "r.jsonl")])
    assert code == EXIT_DATA
    code = main(["analyze", "--rows", str(tmp_path / "nope.jsonl"), "--out-dir", str(tmp_path / "a")])
    assert code == EXIT_DATA


def test_config_file_versus_flag_precedence(pipeline, tmp_path):
    rows = pipeline["paths"]["rows"]
    config = tmp_path / "config.json"
    # a rollup needing 99 degraded tests can never fire on 72 rows
    config.write_text(json.dumps({"min_degraded": 99}), encoding="utf-8")
    code = main(
        ["analyze", "--rows", str(rows), "--out-dir", str(tmp_path / "a1"), "--config", str(config)]
    )
    assert code == EXIT_OK
    code = main(
        [
            "analyze",
            "--rows", str(rows),
            "--out-dir", str(tmp_path / "a2"),
            "--config", str(config),
            "--min-degraded", "2",
        ]
    )
    assert code == EXIT_DEGRADED
