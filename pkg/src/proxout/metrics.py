"""Evaluation metrics: classification report, OLS R-squared, box statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MetricsError(ValueError):
    pass


class LengthMismatch(MetricsError):
    pass


class InvalidProbabilities(MetricsError):
    pass


class ConstantX(MetricsError):
    pass


class TooShort(MetricsError):
    pass


class Empty(MetricsError):
    pass


@dataclass(frozen=True)
class ClassificationReport:
    accuracy: float
    f1_micro: float
    f1_macro: float
    f1_weighted: float
    auc_micro: float
    auc_macro: float
    confusion: np.ndarray

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "f1_micro": self.f1_micro,
            "f1_macro": self.f1_macro,
            "f1_weighted": self.f1_weighted,
            "auc_micro": self.auc_micro,
            "auc_macro": self.auc_macro,
            "confusion": self.confusion.tolist(),
        }


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    r_squared: float


@dataclass(frozen=True)
class BoxStats:
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float
    outlier_points: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "q1": self.q1,
            "median": self.median,
            "q3": self.q3,
            "whisker_low": self.whisker_low,
            "whisker_high": self.whisker_high,
            "outlier_points": list(self.outlier_points),
        }


def binary_auc(y_true: np.ndarray, scores: np.ndarray) -> float:
    """Area under the ROC curve via explicit trapezoidal integration.

    Tied scores are grouped into single curve steps, which matches
    midpoint rank handling.
    """
    y_true = np.asarray(y_true, dtype=bool)
    scores = np.asarray(scores, dtype=np.float64)
    pos = int(y_true.sum())
    neg = y_true.size - pos
    if pos == 0 or neg == 0:
        raise MetricsError("AUC needs both positive and negative examples")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    t = y_true[order].astype(np.float64)
    new_threshold = np.nonzero(np.concatenate((s[1:] != s[:-1], [True])))[0]
    tp = np.cumsum(t)[new_threshold]
    fp = (new_threshold + 1) - tp
    tpr = np.concatenate(([0.0], tp / pos))
    fpr = np.concatenate(([0.0], fp / neg))
    return float(np.trapezoid(tpr, fpr))


def _f1(tp: float, fp: float, fn: float) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom > 0 else 0.0


def classification_report(true_labels, predicted_labels,
                          probabilities) -> ClassificationReport:
    """Accuracy, micro/macro F1 (plus a support-weighted macro variant),
    one-vs-rest micro/macro AUC, and the confusion matrix.

    Macro averages run over classes with test support; AUC per class is
    skipped when a class has no positives or no negatives.
    """
    y = np.asarray(true_labels, dtype=np.int64)
    yp = np.asarray(predicted_labels, dtype=np.int64)
    proba = np.asarray(probabilities, dtype=np.float64)
    if y.shape[0] != yp.shape[0] or y.shape[0] != proba.shape[0]:
        raise LengthMismatch("labels and probabilities disagree on length")
    if proba.ndim != 2:
        raise InvalidProbabilities("probability matrix must be 2-D")
    if np.any(proba < -1e-9) or np.any(proba > 1 + 1e-9):
        raise InvalidProbabilities("probabilities outside [0, 1]")
    if not np.allclose(proba.sum(axis=1), 1.0, atol=1e-6):
        raise InvalidProbabilities("probability rows must sum to 1")
    k = proba.shape[1]
    if y.max() >= k or yp.max() >= k or y.min() < 0 or yp.min() < 0:
        raise MetricsError("label ids exceed probability columns")

    n = y.shape[0]
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (y, yp), 1)
    accuracy = float(np.trace(confusion)) / n

    support = confusion.sum(axis=1)
    tp = np.diagonal(confusion).astype(np.float64)
    fp = confusion.sum(axis=0) - tp
    fn = support - tp
    f1_micro = _f1(tp.sum(), fp.sum(), fn.sum())
    present = support > 0
    per_class_f1 = np.array([_f1(tp[j], fp[j], fn[j]) for j in range(k)])
    f1_macro = float(per_class_f1[present].mean())
    f1_weighted = float(
        np.sum(per_class_f1[present] * support[present]) / support[present].sum())

    aucs = []
    for j in range(k):
        pos = int((y == j).sum())
        if pos == 0 or pos == n:
            continue
        aucs.append(binary_auc(y == j, proba[:, j]))
    auc_macro = float(np.mean(aucs)) if aucs else float("nan")
    indicator = np.zeros((n, k), dtype=bool)
    indicator[np.arange(n), y] = True
    auc_micro = binary_auc(indicator.ravel(), proba.ravel())

    return ClassificationReport(
        accuracy=accuracy, f1_micro=float(f1_micro), f1_macro=f1_macro,
        f1_weighted=f1_weighted, auc_micro=auc_micro, auc_macro=auc_macro,
        confusion=confusion,
    )


def linear_regression_r2(x, y) -> RegressionResult:
    """Ordinary least squares of y on x with R-squared.

    A constant y gives r_squared = 0 by convention (zero total variance).
    Raises ConstantX and TooShort (< 3 points).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] != y.shape[0]:
        raise LengthMismatch("series lengths differ")
    if x.shape[0] < 3:
        raise TooShort("need at least 3 points")
    xm = x.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        raise ConstantX("independent series is constant")
    ym = y.mean()
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 0.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RegressionResult(slope=slope, intercept=intercept, r_squared=r2)


def box_stats(values) -> BoxStats:
    """Quartiles (linear interpolation), Tukey whiskers, outside points."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise Empty("box statistics need at least one value")
    q1, med, q3 = (float(q) for q in np.percentile(v, [25, 50, 75]))
    iqr = q3 - q1
    lo = q1 - 1.5 * iqr
    hi = q3 + 1.5 * iqr
    outliers = tuple(float(x) for x in np.sort(v[(v < lo) | (v > hi)]))
    return BoxStats(q1=q1, median=med, q3=q3, whisker_low=lo,
                    whisker_high=hi, outlier_points=outliers)
