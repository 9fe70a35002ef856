"""Random-forest proximity learning and class-wise outlier measures."""

__version__ = "0.1.0"

from ._backend import active_backend
from .data import (Dataset, FeatureSchema, FoldPlan, balanced_class_weights,
                   dataset_from_arrays, impute_zero, load_csv,
                   stratified_kfold, stratified_split,
                   stratified_split_indices)
from .forest import (DecisionTree, Forest, ForestParams, apply, fit_forest,
                     load_forest, oob_indicator, predict, predict_proba,
                     save_forest)
from .mds import Embedding, mds_embed
from .metrics import (BoxStats, ClassificationReport, RegressionResult,
                      box_stats, classification_report, linear_regression_r2)
from .modelsel import CVResult, Grid, grid_search
from .outlier import (OutlierScores, class_average_proximity,
                      cross_class_profile, outlier_measure,
                      quartile_assignment, raw_outlier, score_dataset,
                      within_class_outliers)
from .proximity import (DistanceMatrix, ProximityMatrix, distance_matrix,
                        gap_proximity_matrix, load_proximity,
                        oob_proximity_matrix, proximity_matrix,
                        proximity_oracle, save_proximity)
from .synthetic import SyntheticBundle, SyntheticSpec, generate_synthetic

__all__ = [
    "__version__",
    "active_backend",
    "Dataset", "FeatureSchema", "FoldPlan", "balanced_class_weights",
    "dataset_from_arrays", "impute_zero", "load_csv", "stratified_kfold",
    "stratified_split", "stratified_split_indices",
    "DecisionTree", "Forest", "ForestParams", "apply", "fit_forest",
    "load_forest", "oob_indicator", "predict", "predict_proba", "save_forest",
    "Embedding", "mds_embed",
    "BoxStats", "ClassificationReport", "RegressionResult", "box_stats",
    "classification_report", "linear_regression_r2",
    "CVResult", "Grid", "grid_search",
    "OutlierScores", "class_average_proximity", "cross_class_profile",
    "outlier_measure", "quartile_assignment", "raw_outlier", "score_dataset",
    "within_class_outliers",
    "DistanceMatrix", "ProximityMatrix", "distance_matrix",
    "gap_proximity_matrix", "load_proximity", "oob_proximity_matrix",
    "proximity_matrix", "proximity_oracle", "save_proximity",
    "SyntheticBundle", "SyntheticSpec", "generate_synthetic",
]
