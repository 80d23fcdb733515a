"""Command line pipeline driver.

Subcommands mirror the pipeline stages: synth, ingest, categorize,
assemble, decompose, train-baseline, analyze, train-risk, score, report.
Every stage reads and writes files, never global state, so stages can be
re-run individually and reruns with identical inputs produce identical
bytes.

Exit codes: 0 success, 1 unusable input data, 2 bad configuration or
usage, 3 analysis completed and found at least one degraded commit.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import assemble as assemble_mod
from . import baseline as baseline_mod
from . import commitcat
from . import ingest as ingest_mod
from . import refine
from . import residual as residual_mod
from . import risk as risk_mod
from . import stats
from . import synthgen
from .errors import ConfigError, DataError, RanwatchError
from .store import load_commits, read_records, write_records

EXIT_OK = 0
EXIT_DATA = 1
EXIT_CONFIG = 2
EXIT_DEGRADED = 3


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _write_tsv(path: Path, header: tuple[str, ...], rows: list[tuple]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["\t".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError("tsv row width does not match header")
        lines.append("\t".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        cfg = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{p}: config must be a JSON object")
    return cfg


def _resolve(args: argparse.Namespace, cfg: dict, name: str, default):
    """Flag beats config file beats default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in cfg:
        return cfg[name]
    return default


def _make_refine_client(mode: str, retries: int) -> refine.RefinementClient | None:
    if mode == "none":
        return None
    if mode == "stub":
        return refine.RefinementClient(refine.EchoStubTransport(), retries=retries)
    if "://" in mode:
        return refine.RefinementClient(refine.HttpTextTransport(mode), retries=retries)
    raise ConfigError(f"--refine must be 'stub', 'none', or a URL, got {mode!r}")


# ---------------------------------------------------------------------------
# subcommands


def _cmd_synth(args: argparse.Namespace) -> int:
    if args.scenario:
        spec = synthgen.load_scenario(args.scenario)
    else:
        spec = _demo_scenario()
    corpus = synthgen.generate(spec, args.out)
    print(f"dataset: {corpus.dataset_dir}")
    print(f"commits: {corpus.commits_file}")
    print(f"truth: {corpus.truth_tests_file} {corpus.truth_commits_file}")
    return EXIT_OK


def _demo_scenario() -> synthgen.ScenarioSpec:
    return synthgen.ScenarioSpec(
        seed=7,
        n_commits=12,
        tests_per_commit=6,
        sinr_range=(8.0, 30.0),
        injections=(
            synthgen.Injection(commit_index=3, layers=("PDCP",), drop=0.4),
            synthgen.Injection(
                commit_index=8, layers=("MAC", "PHY"), drop=0.5, onset_delay=1
            ),
        ),
    )


def _cmd_ingest(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    rules = (
        ingest_mod.load_log_rules(args.log_rules)
        if args.log_rules
        else ingest_mod.default_log_rules()
    )
    commits = load_commits(args.commits) if args.commits else []
    entries, warnings = ingest_mod.scan_dataset(args.dataset)
    for warning in warnings:
        print(f"warning: {warning.path}: {warning.reason}", file=sys.stderr)
    target_rate = _resolve(args, cfg, "target_rate", None)
    records = []
    rejected = 0
    for entry in entries:
        assigned = ingest_mod.assign_commit(entry.test_id, commits) if commits else None
        commit_hash = assigned.hash if assigned else None
        try:
            record = ingest_mod.build_test_record(
                entry.test_id,
                entry,
                rules,
                commit_hash,
                target_rate=target_rate,
            )
        except DataError as exc:
            rejected += 1
            print(f"warning: {entry.test_id}: {exc}", file=sys.stderr)
            continue
        records.append(record.encode())
    if not records:
        raise DataError("no usable test records in dataset")
    write_records(args.out, records)
    print(f"ingested {len(records)} tests, rejected {rejected}, warnings {len(warnings)}")
    return EXIT_OK


def _cmd_categorize(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    config = (
        commitcat.load_rule_config(args.rules)
        if args.rules
        else commitcat.default_rule_config()
    )
    retries = int(_resolve(args, cfg, "retries", 2))
    mode = _resolve(args, cfg, "refine", "none")
    client = _make_refine_client(mode, retries)
    commits = load_commits(args.commits)
    texts = [
        commitcat.CommitText(
            hash=c.hash,
            message=c.message,
            files_changed=c.files_changed,
            lines_added=c.lines_added,
            lines_deleted=c.lines_deleted,
        )
        for c in commits
    ]
    outcomes = commitcat.categorize_commits(
        texts, config, client=client, concurrency=int(_resolve(args, cfg, "concurrency", 4))
    )
    records = []
    status_counts: dict[str, int] = {}
    for text, result, status in outcomes:
        status_counts[status] = status_counts.get(status, 0) + 1
        features = commitcat.build_feature_vector(text, result)
        record = features.encode()
        record["affected"] = sorted(result.affected)
        record["confidence"] = result.confidence
        record["change_type"] = result.change_type
        record["status"] = status
        records.append(record)
    degraded_mode = status_counts.get("fallback_unreachable", 0) > 0
    records.append(
        {
            "kind": "categorize_status",
            "n_commits": len(outcomes),
            "counts": dict(sorted(status_counts.items())),
            "degraded_mode": degraded_mode,
        }
    )
    write_records(args.out, records)
    if degraded_mode:
        print(
            "warning: refinement endpoint unreachable, keyword drafts used as-is",
            file=sys.stderr,
        )
    summary = ", ".join(f"{k}={v}" for k, v in sorted(status_counts.items()))
    print(f"categorized {len(outcomes)} commits ({summary})")
    return EXIT_OK


def _cmd_assemble(args: argparse.Namespace) -> int:
    test_records = [
        ingest_mod.TestRecord.decode(r)
        for r in read_records(args.records, kind="test_record")
    ]
    feature_records = read_records(args.features, kind="commit_features")
    features = {
        r["hash"]: commitcat.CommitFeatures.decode(r) for r in feature_records
    }
    commits = load_commits(args.commits)
    rows, skipped = assemble_mod.assemble_rows(test_records, features, commits)
    for test_id, reason in skipped:
        print(f"warning: skipped {test_id}: {reason}", file=sys.stderr)
    write_records(args.out, [row.encode() for row in rows])
    print(f"assembled {len(rows)} rows, skipped {len(skipped)}")
    return EXIT_OK


_DECOMP_TARGETS = ("efficiency", "packet_loss", "jitter")
_CHANNEL_COLUMNS = ("rsrp", "sinr", "dl_bler", "ul_bler")
_LOAD_COLUMNS = ("target_rate",)


def _discretize_column(values: np.ndarray, n_bins: int, name: str) -> np.ndarray:
    """Quantile-bin numeric columns; small vocabularies pass through."""
    distinct = np.unique(values)
    if distinct.size <= n_bins:
        return np.searchsorted(distinct, values)
    return stats.discretize(values, n_bins=n_bins, name=name).labels


def _decomposition_groups(rows: list) -> dict[str, list[tuple[str, np.ndarray]]]:
    """Raw factor columns per group, median-imputed where measurements gap."""
    n = len(rows)
    groups: dict[str, list[tuple[str, np.ndarray]]] = {
        "channel": [],
        "load": [],
        "code": [],
    }
    for col in _CHANNEL_COLUMNS + _LOAD_COLUMNS:
        values = np.full(n, np.nan)
        for i, row in enumerate(rows):
            v = row.env.get(col)
            if v is not None:
                values[i] = float(v)
        observed = values[~np.isnan(values)]
        fill = float(np.median(observed)) if observed.size else 0.0
        values[np.isnan(values)] = fill
        group = "load" if col in _LOAD_COLUMNS else "channel"
        groups[group].append((col, values))
    for name in commitcat.FEATURE_NAMES[: len(commitcat.CATEGORIES)]:
        values = np.array([row.commit[name] for row in rows], dtype=float)
        groups["code"].append((name, values))
    return groups


def _cmd_decompose(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    max_bins = int(_resolve(args, cfg, "max_bins", 5))
    if max_bins < 2:
        raise ConfigError("max_bins must be >= 2")
    rows = assemble_mod.load_rows(args.rows)
    raw_groups = _decomposition_groups(rows)
    out_rows = []
    for target in _DECOMP_TARGETS:
        values = [getattr(row, target) for row in rows]
        keep = [i for i, v in enumerate(values) if v is not None]
        if len(keep) < 2:
            continue
        y = np.array([values[i] for i in keep], dtype=float)
        if float(np.var(y)) == 0.0:
            continue
        binned: dict[str, list[np.ndarray]] = {}
        for group, columns in raw_groups.items():
            binned[group] = [
                _discretize_column(vals[keep], max_bins, name) for name, vals in columns
            ]
        for group in ("channel", "load", "code"):
            conditioning = [
                col
                for other in ("channel", "load", "code")
                if other != group
                for col in binned[other]
            ]
            report = stats.variance_explained(
                y,
                binned[group],
                conditioning,
                target=target,
                factor=group,
                conditioning=tuple(o for o in ("channel", "load", "code") if o != group),
            )
            out_rows.append(
                (group, target, report.score, report.n_rows, report.n_groups)
            )
    if not out_rows:
        raise DataError("no decomposable targets with variance in the rows")
    _write_tsv(
        Path(args.out),
        ("factor", "target", "score", "n_rows", "n_groups"),
        out_rows,
    )
    for group, target, score, _, _ in out_rows:
        print(f"{group:>8} -> {target}: {score:.4f}")
    return EXIT_OK


def _env_matrix(rows: list) -> baseline_mod.FeatureMatrix:
    ids = [f"{row.day}/{row.time}" for row in rows]
    return baseline_mod.build_feature_matrix(
        ids, assemble_mod.ENV_FEATURES, [row.env for row in rows]
    )


def _cmd_train_baseline(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    seed = int(_resolve(args, cfg, "seed", 0))
    params = baseline_mod.BaselineParams(
        n_trees=int(_resolve(args, cfg, "trees", 100)),
        max_depth=int(_resolve(args, cfg, "depth", 8)),
        min_samples_leaf=int(_resolve(args, cfg, "min_samples_leaf", 1)),
    )
    test_fraction = float(_resolve(args, cfg, "test_fraction", 0.2))
    rows = assemble_mod.load_rows(args.rows)
    rows.sort(key=lambda r: (r.test_epoch, r.commit_hash))
    train_idx, test_idx = baseline_mod.chronological_split(len(rows), test_fraction)
    train_rows = [rows[i] for i in train_idx]
    test_rows = [rows[i] for i in test_idx]
    matrix = _env_matrix(train_rows)
    y_train = np.array([r.efficiency for r in train_rows], dtype=float)
    model = baseline_mod.train_baseline(matrix, y_train, params, seed)

    X_test = np.vstack(
        [baseline_mod.vectorize_row(model, r.env) for r in test_rows]
    )
    y_test = np.array([r.efficiency for r in test_rows], dtype=float)
    pred = baseline_mod.predict_matrix(model, X_test)
    eff_metrics = baseline_mod.regression_metrics(y_test, pred)
    rates = np.array([r.target_rate for r in test_rows], dtype=float)
    mbps_metrics = baseline_mod.regression_metrics(y_test * rates, pred * rates)

    baseline_mod.save_model(model, args.out)
    metric_rows = [
        ("efficiency", eff_metrics.r2, eff_metrics.mae, eff_metrics.rmse, eff_metrics.n),
        ("mbps", mbps_metrics.r2, mbps_metrics.mae, mbps_metrics.rmse, mbps_metrics.n),
    ]
    if args.metrics:
        _write_tsv(Path(args.metrics), ("unit", "r2", "mae", "rmse", "n"), metric_rows)
    print(f"model: {args.out} (hash {baseline_mod.model_hash(model)[:12]})")
    for unit, r2, mae, rmse, n in metric_rows:
        print(f"held-out {unit}: r2={r2:.4f} mae={mae:.4g} rmse={rmse:.4g} n={n}")
    return EXIT_OK


def _cmd_analyze(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    thresholds = residual_mod.Thresholds(
        ratio_floor=float(_resolve(args, cfg, "ratio_floor", 0.9)),
        min_expected_efficiency=float(_resolve(args, cfg, "min_expected", 0.6)),
    )
    min_degraded = int(_resolve(args, cfg, "min_degraded", 2))
    seed = int(_resolve(args, cfg, "seed", 0))
    k_folds = int(_resolve(args, cfg, "k_folds", 5))
    rows = assemble_mod.load_rows(args.rows)
    rows.sort(key=lambda r: (r.test_epoch, r.commit_hash))

    if args.model:
        model = baseline_mod.load_model(args.model)
        X = np.vstack([baseline_mod.vectorize_row(model, r.env) for r in rows])
        expected = baseline_mod.predict_matrix(model, X)
    else:
        matrix = _env_matrix(rows)
        y = np.array([r.efficiency for r in rows], dtype=float)
        params = baseline_mod.BaselineParams(
            n_trees=int(_resolve(args, cfg, "trees", 100)),
            max_depth=int(_resolve(args, cfg, "depth", 8)),
        )
        expected = baseline_mod.cross_fit_predictions(
            matrix, y, params, seed, k_folds=k_folds
        )

    rows = [
        dataclasses.replace(row, expected_efficiency=float(e))
        for row, e in zip(rows, expected)
    ]
    labels = residual_mod.label_rows(rows, thresholds)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_records(out_dir / "labels.jsonl", [l.encode() for l in labels])

    summary = residual_mod.summarize(labels, thresholds)
    _write_tsv(
        out_dir / "residual_summary.tsv",
        ("metric", "value"),
        [(k, getattr(summary, k)) for k in summary.__dataclass_fields__],
    )
    _write_tsv(
        out_dir / "layer_impact.tsv",
        ("layer", "degraded_cases", "mean_ratio", "median_ratio", "std_ratio"),
        [
            (r.layer, r.degraded_cases, r.mean_ratio, r.median_ratio, r.std_ratio)
            for r in residual_mod.layer_impact_table(labels)
        ],
    )
    rollups = residual_mod.commit_rollup(labels, min_degraded=min_degraded)
    _write_tsv(
        out_dir / "commit_rollup.tsv",
        ("commit_hash", "n_tests", "n_degraded", "min_ratio", "mean_ratio", "verdict"),
        [
            (r.commit_hash, r.n_tests, r.n_degraded, r.min_ratio, r.mean_ratio, r.verdict)
            for r in rollups
        ],
    )
    _write_tsv(
        out_dir / "residual_hist.tsv",
        ("bin_lo", "bin_hi", "count"),
        residual_mod.ratio_histogram(labels),
    )
    temporal = {
        t.commit_hash: t
        for t in residual_mod.temporal_scores(
            labels, ratio_floor=thresholds.ratio_floor
        )
    }
    _write_tsv(
        out_dir / "temporal_comparison.tsv",
        ("commit_hash", "residual_verdict", "temporal_score", "temporal_flag"),
        [
            (
                r.commit_hash,
                r.verdict,
                temporal[r.commit_hash].score,
                temporal[r.commit_hash].flagged,
            )
            for r in rollups
        ],
    )
    n_bad = sum(1 for r in rollups if r.verdict == "degraded")
    print(
        f"labeled {len(labels)} tests: {summary.n_degraded} degraded, "
        f"{n_bad} commits rolled up as degraded"
    )
    return EXIT_DEGRADED if n_bad else EXIT_OK


_RISK_COLUMNS = tuple(assemble_mod.ENV_FEATURES) + commitcat.FEATURE_NAMES


def _risk_binary_slots() -> tuple[int, ...]:
    offset = len(assemble_mod.ENV_FEATURES)
    index = {name: i for i, name in enumerate(commitcat.FEATURE_NAMES)}
    return tuple(offset + index[name] for name in commitcat.BINARY_FEATURE_NAMES)


def _cmd_train_risk(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    seed = int(_resolve(args, cfg, "seed", 0))
    test_fraction = float(_resolve(args, cfg, "test_fraction", 0.2))
    params = risk_mod.RiskParams(
        n_estimators=int(_resolve(args, cfg, "estimators", 400)),
        max_depth=int(_resolve(args, cfg, "depth", 4)),
        learning_rate=float(_resolve(args, cfg, "learning_rate", 0.1)),
        min_samples_leaf=int(_resolve(args, cfg, "min_samples_leaf", 5)),
        smote_k=int(_resolve(args, cfg, "smote_k", 5)),
    )
    rows = assemble_mod.load_rows(args.rows)
    rows.sort(key=lambda r: (r.test_epoch, r.commit_hash))
    label_records = read_records(args.labels, kind="label")
    degraded_by_test = {
        (r["day"], r["time"]): bool(r["degraded"]) for r in label_records
    }
    y_all = []
    for row in rows:
        key = (row.day, row.time)
        if key not in degraded_by_test:
            raise DataError(f"no label for test {row.day}/{row.time}")
        y_all.append(1 if degraded_by_test[key] else 0)
    y_all = np.array(y_all, dtype=int)

    train_idx, test_idx = baseline_mod.chronological_split(len(rows), test_fraction)
    train_rows = [rows[i] for i in train_idx]
    matrix = baseline_mod.build_feature_matrix(
        [f"{r.day}/{r.time}" for r in train_rows],
        _RISK_COLUMNS,
        [{**r.env, **r.commit} for r in train_rows],
    )
    y_train = y_all[train_idx]
    X_bal, y_bal, synthetic = risk_mod.balance_training_set(
        matrix.values, y_train, params, seed, _risk_binary_slots()
    )
    model = risk_mod.train_risk(X_bal, y_bal, params, seed, columns=_RISK_COLUMNS)
    model.meta["imputation"] = dict(matrix.imputation)
    model.meta["n_synthetic"] = int(synthetic.sum())
    risk_mod.save_model(model, args.out)

    test_rows = [rows[i] for i in test_idx]
    fills = matrix.imputation
    X_test = np.empty((len(test_rows), len(_RISK_COLUMNS)), dtype=float)
    for i, r in enumerate(test_rows):
        merged = {**r.env, **r.commit}
        for j, c in enumerate(_RISK_COLUMNS):
            v = merged.get(c)
            X_test[i, j] = fills[c] if v is None else float(v)
    y_test = y_all[test_idx]
    metrics = risk_mod.evaluate_classifier(model, X_test, y_test)
    lines = [
        f"model: {args.out} (hash {risk_mod.model_hash(model)[:12]})",
        f"train: {len(train_rows)} rows ({int(synthetic.sum())} synthetic added), "
        f"test: {len(test_rows)} rows",
        f"held-out accuracy {metrics.accuracy:.4f}, confusion {metrics.confusion}",
    ]
    if metrics.positive.recall is not None:
        lines.append(
            f"degraded class: precision={_fmt(metrics.positive.precision)} "
            f"recall={_fmt(metrics.positive.recall)} f1={_fmt(metrics.positive.f1)}"
        )
    if len(set(y_test.tolist())) == 2:
        auc = risk_mod.roc_auc(y_test, risk_mod.predict_proba(model, X_test))
        lines.append(f"held-out auc {auc:.4f}")
    if args.metrics:
        _write_tsv(
            Path(args.metrics),
            ("class", "precision", "recall", "f1", "support"),
            [
                (
                    "degraded",
                    metrics.positive.precision,
                    metrics.positive.recall,
                    metrics.positive.f1,
                    metrics.positive.support,
                ),
                (
                    "clean",
                    metrics.negative.precision,
                    metrics.negative.recall,
                    metrics.negative.f1,
                    metrics.negative.support,
                ),
            ],
        )
    print("\n".join(lines))
    return EXIT_OK


def _cmd_score(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    threshold = float(_resolve(args, cfg, "threshold", 0.5))
    model = risk_mod.load_model(args.model)
    fills = model.meta.get("imputation")
    if not isinstance(fills, dict):
        raise DataError("risk model has no imputation table, retrain it")
    feature_records = read_records(args.features, kind="commit_features")
    if not feature_records:
        raise DataError(f"no commit features in {args.features}")
    out_rows = []
    for record in feature_records:
        features = commitcat.CommitFeatures.decode(record)
        merged = dict(features.as_dict())
        x = np.array(
            [
                [
                    float(merged[c]) if c in merged else float(fills[c])
                    for c in model.columns
                ]
            ],
            dtype=float,
        )
        proba = float(risk_mod.predict_proba(model, x)[0])
        out_rows.append((features.commit_hash, proba, proba >= threshold))
    out_rows.sort(key=lambda r: (-r[1], r[0]))
    _write_tsv(Path(args.out), ("commit_hash", "risk", "flagged"), out_rows)
    flagged = sum(1 for r in out_rows if r[2])
    print(f"scored {len(out_rows)} commits, {flagged} above {threshold:g}")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    thresholds = residual_mod.Thresholds(
        ratio_floor=float(_resolve(args, cfg, "ratio_floor", 0.9)),
        min_expected_efficiency=float(_resolve(args, cfg, "min_expected", 0.6)),
    )
    labels = [
        residual_mod.DegradationLabel.decode(r)
        for r in read_records(args.labels, kind="label")
    ]
    if not labels:
        raise DataError(f"no labels in {args.labels}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = residual_mod.summarize(labels, thresholds)
    rollups = residual_mod.commit_rollup(labels)
    floors = tuple(
        float(f) for f in _resolve(args, cfg, "floors", (0.8, 0.85, 0.9, 0.95, 0.98))
    )
    tradeoff = residual_mod.coverage_tradeoff(
        labels, floors, min_expected=thresholds.min_expected_efficiency
    )
    _write_tsv(
        out_dir / "floor_tradeoff.tsv",
        ("floor", "retained_fraction", "flagged_tests", "retained_std"),
        tradeoff,
    )
    lines = [
        "throughput attribution report",
        "",
        f"tests analyzed: {summary.n}",
        f"mean ratio: {summary.mean_ratio:.4f}  median: {summary.median_ratio:.4f}",
        f"below floor {thresholds.ratio_floor:g}: {summary.frac_below_floor:.1%}",
        f"degraded tests: {summary.n_degraded}",
    ]
    if summary.welch_p is not None:
        lines.append(
            f"degraded vs rest: t={summary.welch_t:.3f} p={summary.welch_p:.3g} "
            f"d={summary.cohens_d:.3f}"
        )
    degraded_commits = [r for r in rollups if r.verdict == "degraded"]
    lines.append(f"commits degraded: {len(degraded_commits)} of {len(rollups)}")
    for r in degraded_commits:
        lines.append(
            f"  {r.commit_hash[:12]}  {r.n_degraded}/{r.n_tests} tests, "
            f"min ratio {r.min_ratio:.3f}"
        )
    (out_dir / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ranwatch",
        description="attribute throughput changes to code or environment",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset with ground truth")
    p.add_argument("--scenario", help="scenario JSON (omit for the built-in demo)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ingest", help="parse raw test artifacts into records")
    p.add_argument("--dataset", required=True)
    p.add_argument("--commits")
    p.add_argument("--out", required=True)
    p.add_argument("--log-rules", dest="log_rules")
    p.add_argument("--target-rate", dest="target_rate", type=float)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("categorize", help="map commit messages to categories")
    p.add_argument("--commits", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rules")
    p.add_argument("--refine", help="stub, none, or a refiner URL")
    p.add_argument("--retries", type=int)
    p.add_argument("--concurrency", type=int)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_categorize)

    p = sub.add_parser("assemble", help="join tests with commit features")
    p.add_argument("--records", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--commits", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_assemble)

    p = sub.add_parser("decompose", help="variance shares of channel, load, code")
    p.add_argument("--rows", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-bins", dest="max_bins", type=int)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_decompose)

    p = sub.add_parser("train-baseline", help="fit the environment-only model")
    p.add_argument("--rows", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--metrics")
    p.add_argument("--seed", type=int)
    p.add_argument("--trees", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--min-samples-leaf", dest="min_samples_leaf", type=int)
    p.add_argument("--test-fraction", dest="test_fraction", type=float)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_train_baseline)

    p = sub.add_parser("analyze", help="label tests and roll up commit verdicts")
    p.add_argument("--rows", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--model", help="baseline model file (omit to cross-fit)")
    p.add_argument("--ratio-floor", dest="ratio_floor", type=float)
    p.add_argument("--min-expected", dest="min_expected", type=float)
    p.add_argument("--min-degraded", dest="min_degraded", type=int)
    p.add_argument("--k-folds", dest="k_folds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--trees", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("train-risk", help="fit the commit risk classifier")
    p.add_argument("--rows", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--metrics")
    p.add_argument("--seed", type=int)
    p.add_argument("--estimators", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--min-samples-leaf", dest="min_samples_leaf", type=int)
    p.add_argument("--smote-k", dest="smote_k", type=int)
    p.add_argument("--test-fraction", dest="test_fraction", type=float)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_train_risk)

    p = sub.add_parser("score", help="score commits with a trained risk model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("report", help="summarize analysis output")
    p.add_argument("--labels", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--ratio-floor", dest="ratio_floor", type=float)
    p.add_argument("--min-expected", dest="min_expected", type=float)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RanwatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
