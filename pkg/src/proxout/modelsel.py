"""Grid search over forest hyperparameters with stratified k-fold CV."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, stratified_kfold
from .forest import ForestParams, fit_forest, predict, predict_proba
from .metrics import classification_report

DEFAULT_N_TREES = tuple(range(100, 1001, 100))
DEFAULT_MAX_DEPTH = tuple(range(5, 51, 5)) + (None,)
DEFAULT_MAX_FEATURES = ("sqrt", "log2")
DEFAULT_CRITERIA = ("gini", "entropy", "log_loss")

SCORINGS = ("accuracy", "f1_macro")


class ModelSelError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Cartesian hyperparameter grid; defaults follow the standard ranges."""

    n_trees_values: tuple = DEFAULT_N_TREES
    max_depth_values: tuple = DEFAULT_MAX_DEPTH
    max_features_values: tuple = DEFAULT_MAX_FEATURES
    criterion_values: tuple = DEFAULT_CRITERIA

    def __post_init__(self):
        for name in ("n_trees_values", "max_depth_values",
                     "max_features_values", "criterion_values"):
            if not getattr(self, name):
                raise ModelSelError(f"{name} must be nonempty")

    def configs(self):
        """Deterministic config order: trees, depth, features, criterion."""
        for nt, md, mf, cr in itertools.product(
                self.n_trees_values, self.max_depth_values,
                self.max_features_values, self.criterion_values):
            yield {"n_trees": nt, "max_depth": md,
                   "max_features": mf, "criterion": cr}

    def strided(self, stride: int) -> list[dict]:
        """Budgeted mode: every stride-th config of the full enumeration."""
        if stride < 1:
            raise ModelSelError("stride must be >= 1")
        return list(itertools.islice(self.configs(), 0, None, stride))


@dataclass
class CVResult:
    """Per-config CV table plus the selected configuration."""

    table: list[dict] = field(default_factory=list)
    best_config: dict | None = None
    scoring_name: str = "accuracy"
    k: int = 5
    seed: int = 0

    def best_params(self, base: ForestParams) -> ForestParams:
        c = self.best_config
        return ForestParams(
            n_trees=c["n_trees"], max_depth=c["max_depth"],
            max_features=c["max_features"], criterion=c["criterion"],
            min_samples_leaf=base.min_samples_leaf,
            class_weights=base.class_weights, seed=base.seed,
        )


def _score(scoring, report):
    return report.accuracy if scoring == "accuracy" else report.f1_macro


def grid_search(train: Dataset, grid: Grid, k: int = 5, seed: int = 0,
                scoring: str = "accuracy", stride: int = 1,
                base_params: ForestParams | None = None) -> CVResult:
    """Evaluate every grid config on one shared stratified fold plan.

    The winner maximizes the mean validation score; ties prefer fewer
    trees, then shallower depth, then enumeration order.  The full
    per-config table is retained.
    """
    if scoring not in SCORINGS:
        raise ModelSelError(f"scoring must be one of {SCORINGS}")
    base = base_params or ForestParams(seed=seed)
    plan = stratified_kfold(train, k=k, seed=seed)
    folds = [
        (train.take(plan.complement_indices(f)), train.take(plan.fold_indices(f)))
        for f in range(k)
    ]
    result = CVResult(scoring_name=scoring, k=k, seed=seed)
    best_key = None
    for order, config in enumerate(grid.strided(stride)):
        params = ForestParams(
            n_trees=config["n_trees"], max_depth=config["max_depth"],
            max_features=config["max_features"], criterion=config["criterion"],
            min_samples_leaf=base.min_samples_leaf,
            class_weights=base.class_weights, seed=base.seed,
        )
        scores = []
        for fit_part, val_part in folds:
            model = fit_forest(fit_part, params)
            report = classification_report(
                val_part.y, predict(model, val_part), predict_proba(model, val_part))
            scores.append(_score(scoring, report))
        scores = np.asarray(scores)
        mean = float(scores.mean())
        std = float(scores.std())
        result.table.append({
            "config": config, "mean": mean, "std": std,
            "fold_scores": [float(s) for s in scores],
        })
        depth_rank = config["max_depth"] if config["max_depth"] is not None else 2**31
        key = (-mean, config["n_trees"], depth_rank, order)
        if best_key is None or key < best_key:
            best_key = key
            result.best_config = config
    return result


def write_cv_table(path, result: CVResult) -> None:
    """CSV export: one row per config with mean/std and fold scores."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        n_folds = result.k
        writer.writerow(
            ["n_trees", "max_depth", "max_features", "criterion",
             "mean", "std"] + [f"fold_{i}" for i in range(n_folds)])
        for row in result.table:
            c = row["config"]
            writer.writerow(
                [c["n_trees"],
                 "" if c["max_depth"] is None else c["max_depth"],
                 c["max_features"], c["criterion"],
                 repr(row["mean"]), repr(row["std"])]
                + [repr(s) for s in row["fold_scores"]])
