"""Environment-only throughput baseline.

A bagged ensemble of regression trees learns expected efficiency from
radio conditions and offered load alone. Commit features are excluded on
purpose: the model answers "what should this environment deliver", and
deviations from it are what the residual stage attributes to code.

Training data never leaves process memory unordered: rows are assumed
chronologically sorted, and both the held-out split and the cross-fit
folds cut along that order so a model never sees the future of the rows
it predicts.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .store import SCHEMA_VERSION, dumps_record
from .trees import Tree, grow_tree

MIN_TRAINING_ROWS = 50
MIN_FOLD_ROWS = 10


@dataclass(frozen=True)
class BaselineParams:
    n_trees: int = 100
    max_depth: int = 8
    min_samples_leaf: int = 1
    feature_fraction: float | None = None  # None = sqrt(d) per split

    def __post_init__(self) -> None:
        if self.n_trees < 1 or self.max_depth < 1 or self.min_samples_leaf < 1:
            raise ConfigError("tree hyperparameters must be positive")
        if self.feature_fraction is not None and not (0.0 < self.feature_fraction <= 1.0):
            raise ConfigError("feature fraction must be in (0, 1]")

    def candidate_features(self, n_columns: int) -> int:
        if self.feature_fraction is None:
            k = round(math.sqrt(n_columns))
        else:
            k = round(self.feature_fraction * n_columns)
        return max(1, min(n_columns, int(k)))


@dataclass(frozen=True)
class FeatureMatrix:
    ids: tuple[str, ...]
    columns: tuple[str, ...]
    values: np.ndarray  # (n, d) float, fully imputed
    imputation: dict[str, float]


def build_feature_matrix(
    ids: list[str],
    columns: tuple[str, ...],
    raw_rows: list[dict],
) -> FeatureMatrix:
    """Stack row dicts into a dense matrix, median-imputing gaps.

    The imputation table is computed here and stored with the model so
    scoring applies the same fill values the training data saw. A column
    with no observed values at all imputes to 0.0.
    """
    if len(ids) != len(raw_rows):
        raise DataError("ids and rows length mismatch")
    if not raw_rows:
        raise DataError("no rows to build a feature matrix from")
    n, d = len(raw_rows), len(columns)
    values = np.full((n, d), np.nan, dtype=float)
    for i, row in enumerate(raw_rows):
        for j, col in enumerate(columns):
            v = row.get(col)
            if v is not None:
                values[i, j] = float(v)
    imputation: dict[str, float] = {}
    for j, col in enumerate(columns):
        observed = values[:, j][~np.isnan(values[:, j])]
        fill = float(np.median(observed)) if observed.size else 0.0
        imputation[col] = fill
        values[np.isnan(values[:, j]), j] = fill
    return FeatureMatrix(tuple(ids), tuple(columns), values, imputation)


@dataclass(frozen=True)
class BaselineModel:
    columns: tuple[str, ...]
    imputation: dict[str, float]
    params: BaselineParams
    seed: int
    trees: tuple[Tree, ...]
    target_floor: float
    target_ceiling: float
    meta: dict = field(default_factory=dict)


def train_baseline(
    matrix: FeatureMatrix,
    y: np.ndarray,
    params: BaselineParams,
    seed: int,
) -> BaselineModel:
    y = np.asarray(y, dtype=float)
    n, d = matrix.values.shape
    if y.shape != (n,):
        raise DataError("target length does not match feature matrix")
    if n < MIN_TRAINING_ROWS:
        raise DataError(f"need at least {MIN_TRAINING_ROWS} rows to train, got {n}")
    if not np.all(np.isfinite(y)):
        raise DataError("target contains non-finite values")
    if float(np.var(y)) == 0.0:
        raise DataError("target is constant, nothing to learn")
    k = params.candidate_features(d)
    trees = []
    for t in range(params.n_trees):
        rng = np.random.default_rng((seed, t))
        rows = rng.integers(0, n, size=n)
        trees.append(
            grow_tree(
                matrix.values[rows],
                y[rows],
                max_depth=params.max_depth,
                min_samples_leaf=params.min_samples_leaf,
                n_candidate_features=k if k < d else None,
                rng=rng,
            )
        )
    return BaselineModel(
        columns=matrix.columns,
        imputation=dict(matrix.imputation),
        params=params,
        seed=seed,
        trees=tuple(trees),
        target_floor=float(np.min(y)),
        target_ceiling=float(np.max(y)),
        meta={"n_rows": n, "n_columns": d, "candidate_features": k},
    )


def predict_matrix(model: BaselineModel, X: np.ndarray) -> np.ndarray:
    """Ensemble mean, floored at zero.

    Each tree leaf is a mean of training targets, so raw predictions
    already sit inside the training range; the explicit floor only guards
    the degenerate all-negative-target case.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(model.columns):
        raise DataError("prediction input has wrong number of columns")
    acc = np.zeros(X.shape[0], dtype=float)
    for tree in model.trees:
        acc += tree.predict(X)
    return np.maximum(acc / len(model.trees), 0.0)


def vectorize_row(model: BaselineModel, row: dict) -> np.ndarray:
    out = np.empty(len(model.columns), dtype=float)
    for j, col in enumerate(model.columns):
        v = row.get(col)
        if v is None:
            if col not in model.imputation:
                raise DataError(f"no value or imputation entry for column {col}")
            v = model.imputation[col]
        out[j] = float(v)
    return out


def predict_row(model: BaselineModel, row: dict) -> float:
    return float(predict_matrix(model, vectorize_row(model, row)[None, :])[0])


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class RegressionMetrics:
    r2: float
    mae: float
    rmse: float
    n: int


def regression_metrics(y_true: np.ndarray, y_pred: np.ndarray) -> RegressionMetrics:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.ndim != 1 or y_true.size == 0:
        raise DataError("metric inputs must be equal-length non-empty vectors")
    resid = y_true - y_pred
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    mae = float(np.mean(np.abs(resid)))
    rmse = float(math.sqrt(np.mean(resid**2)))
    return RegressionMetrics(r2=r2, mae=mae, rmse=rmse, n=y_true.size)


def evaluate(model: BaselineModel, X: np.ndarray, y: np.ndarray) -> RegressionMetrics:
    return regression_metrics(np.asarray(y, float), predict_matrix(model, X))


def chronological_split(n: int, test_fraction: float = 0.2) -> tuple[np.ndarray, np.ndarray]:
    """Earliest rows train, latest rows test. Assumes sorted input."""
    if not (0.0 < test_fraction < 1.0):
        raise ConfigError("test fraction must be in (0, 1)")
    cut = int(round(n * (1.0 - test_fraction)))
    cut = min(max(cut, 1), n - 1)
    return np.arange(0, cut), np.arange(cut, n)


def cross_fit_predictions(
    matrix: FeatureMatrix,
    y: np.ndarray,
    params: BaselineParams,
    seed: int,
    k_folds: int = 5,
) -> np.ndarray:
    """Out-of-fold prediction for every row.

    Folds are contiguous chronological blocks; each block is predicted by
    a model trained on all the other blocks, so no row's expected value
    comes from a model that saw that row.
    """
    y = np.asarray(y, dtype=float)
    n = matrix.values.shape[0]
    if k_folds < 2:
        raise ConfigError("cross fitting needs at least 2 folds")
    bounds = [round(i * n / k_folds) for i in range(k_folds + 1)]
    sizes = [bounds[i + 1] - bounds[i] for i in range(k_folds)]
    if min(sizes) < MIN_FOLD_ROWS:
        raise DataError(
            f"fold of {min(sizes)} rows is below the minimum of {MIN_FOLD_ROWS}"
        )
    out = np.empty(n, dtype=float)
    for i in range(k_folds):
        lo, hi = bounds[i], bounds[i + 1]
        train_idx = np.concatenate([np.arange(0, lo), np.arange(hi, n)])
        train_matrix = FeatureMatrix(
            ids=tuple(matrix.ids[j] for j in train_idx),
            columns=matrix.columns,
            values=matrix.values[train_idx],
            imputation=matrix.imputation,
        )
        model = train_baseline(train_matrix, y[train_idx], params, seed)
        out[lo:hi] = predict_matrix(model, matrix.values[lo:hi])
    return out


# ---------------------------------------------------------------------------
# persistence

MODEL_KIND = "baseline_model"


def save_model(model: BaselineModel, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_record(_model_record(model)) + "\n", encoding="utf-8")


def _model_record(model: BaselineModel) -> dict:
    return {
        "kind": MODEL_KIND,
        "columns": list(model.columns),
        "imputation": model.imputation,
        "hyperparameters": {
            "n_trees": model.params.n_trees,
            "max_depth": model.params.max_depth,
            "min_samples_leaf": model.params.min_samples_leaf,
            "feature_fraction": model.params.feature_fraction,
            "seed": model.seed,
        },
        "target_floor": model.target_floor,
        "target_ceiling": model.target_ceiling,
        "meta": model.meta,
        "trees": [tree.to_dict() for tree in model.trees],
    }


def load_model(path: str | Path) -> BaselineModel:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"model file not found: {path}")
    try:
        record = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid model JSON: {exc}") from exc
    if record.get("kind") != MODEL_KIND:
        raise DataError(f"{path}: not a baseline model file")
    if record.get("schema_version") != SCHEMA_VERSION:
        raise DataError(f"{path}: unsupported schema version")
    hp = record["hyperparameters"]
    params = BaselineParams(
        n_trees=int(hp["n_trees"]),
        max_depth=int(hp["max_depth"]),
        min_samples_leaf=int(hp["min_samples_leaf"]),
        feature_fraction=hp.get("feature_fraction"),
    )
    return BaselineModel(
        columns=tuple(record["columns"]),
        imputation={k: float(v) for k, v in record["imputation"].items()},
        params=params,
        seed=int(hp["seed"]),
        trees=tuple(Tree.from_dict(t) for t in record["trees"]),
        target_floor=float(record["target_floor"]),
        target_ceiling=float(record["target_ceiling"]),
        meta=dict(record.get("meta", {})),
    )


def model_hash(model: BaselineModel) -> str:
    return hashlib.sha256(dumps_record(_model_record(model)).encode("utf-8")).hexdigest()
