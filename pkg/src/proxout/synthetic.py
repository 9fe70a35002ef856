"""Synthetic category-structured data with injected contaminants and returns.

Each class has a center in numeric feature space; native records scatter
around their own center while injected records are drawn from a foreign
class's center but keep the host label.  Every record also gets a return
series tied to its label's benchmark series, with factor fidelity and
idiosyncratic noise degrading as the record sits farther from its class
center -- so records that look out of place also track their benchmark
poorly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .data import CATEGORICAL, NUMERIC, Dataset, FeatureSchema

# Return-model constants (chosen so central records track their benchmark
# almost perfectly while far records degrade visibly).
_BENCH_VOL = 0.04
_NOISE_BASE_FRAC = 0.03  # idiosyncratic vol fraction at the class center
_NOISE_GAIN = 3.0        # exponential noise growth toward maximal distance
_MODAL_CATEGORY_P = 0.8


class InvalidSpec(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one synthetic dataset + returns panel."""

    n_classes: int = 3
    records_per_class: int = 200
    numeric_dims: int = 8
    categorical_dims: tuple[int, ...] = ()
    class_separation: float = 5.0
    contamination_fraction: float = 0.1
    beta_range: tuple[float, float] = (0.55, 1.0)
    horizon: int = 156
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2:
            raise InvalidSpec("need at least 2 classes")
        if self.records_per_class < 2:
            raise InvalidSpec("need at least 2 records per class")
        if self.numeric_dims < self.n_classes:
            raise InvalidSpec("numeric_dims must be >= n_classes "
                              "(class centers use one axis each)")
        if not 0.0 <= self.contamination_fraction < 1.0:
            raise InvalidSpec("contamination_fraction must lie in [0, 1)")
        if self.class_separation < 0.0:
            raise InvalidSpec("class_separation must be nonnegative")
        if any(v < 2 for v in self.categorical_dims):
            raise InvalidSpec("categorical vocabularies need >= 2 values")
        if not 0.0 < self.beta_range[0] <= self.beta_range[1]:
            raise InvalidSpec("beta_range must satisfy 0 < lo <= hi")
        if self.horizon < 3:
            raise InvalidSpec("horizon must be >= 3")

    def to_dict(self) -> dict:
        return {
            "n_classes": self.n_classes,
            "records_per_class": self.records_per_class,
            "numeric_dims": self.numeric_dims,
            "categorical_dims": list(self.categorical_dims),
            "class_separation": self.class_separation,
            "contamination_fraction": self.contamination_fraction,
            "beta_range": list(self.beta_range),
            "horizon": self.horizon,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        return cls(
            n_classes=int(d.get("n_classes", 3)),
            records_per_class=int(d.get("records_per_class", 200)),
            numeric_dims=int(d.get("numeric_dims", 8)),
            categorical_dims=tuple(int(v) for v in d.get("categorical_dims", ())),
            class_separation=float(d.get("class_separation", 5.0)),
            contamination_fraction=float(d.get("contamination_fraction", 0.1)),
            beta_range=tuple(float(v) for v in d.get("beta_range", (0.55, 1.0))),
            horizon=int(d.get("horizon", 156)),
            seed=int(d.get("seed", 0)),
        )


@dataclass
class SyntheticBundle:
    dataset: Dataset
    returns_panel: np.ndarray     # n x horizon
    benchmark_panel: np.ndarray   # K x horizon
    is_injected: np.ndarray       # n bools
    center_distance: np.ndarray   # n distances to own-class center
    spec: SyntheticSpec = field(repr=False, default=None)


def _class_centers(spec: SyntheticSpec) -> np.ndarray:
    # One axis per class: pairwise center distance is exactly
    # class_separation.
    centers = np.zeros((spec.n_classes, spec.numeric_dims))
    for k in range(spec.n_classes):
        centers[k, k] = spec.class_separation / np.sqrt(2.0)
    return centers


def generate_synthetic(spec: SyntheticSpec) -> SyntheticBundle:
    """Draw the dataset, benchmark series, and record return series.

    Deterministic for a fixed seed: a single seeded generator is consumed
    in a fixed order regardless of threading.
    """
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    k_classes = spec.n_classes
    per = spec.records_per_class
    n = k_classes * per
    n_inject = int(round(per * spec.contamination_fraction))
    centers = _class_centers(spec)

    labels = np.repeat(np.arange(k_classes), per)
    injected = np.zeros(n, dtype=bool)
    source_class = labels.copy()
    for k in range(k_classes):
        block = np.arange(k * per, (k + 1) * per)
        tail = block[per - n_inject:]
        injected[tail] = True
        # round-robin over the other classes keeps sources balanced
        others = [c for c in range(k_classes) if c != k]
        for pos, i in enumerate(tail):
            source_class[i] = others[pos % len(others)]

    X_num = rng.standard_normal((n, spec.numeric_dims)) + centers[source_class]

    cat_cols = []
    for c, vocab_size in enumerate(spec.categorical_dims):
        modal = source_class % vocab_size
        draw = rng.random(n)
        alt = rng.integers(0, vocab_size - 1, size=n)
        alt = np.where(alt >= modal, alt + 1, alt)  # uniform over non-modal
        cat_cols.append(np.where(draw < _MODAL_CATEGORY_P, modal, alt))

    columns = [(f"num_{j}", NUMERIC) for j in range(spec.numeric_dims)]
    columns += [(f"cat_{c}", CATEGORICAL) for c in range(len(spec.categorical_dims))]
    vocabularies = {
        f"cat_{c}": tuple(f"v{v}" for v in range(size))
        for c, size in enumerate(spec.categorical_dims)
    }
    schema = FeatureSchema(tuple(columns), "category", vocabularies=vocabularies)
    X = np.empty((n, len(columns)), dtype=np.float64)
    X[:, : spec.numeric_dims] = X_num
    for c, col in enumerate(cat_cols):
        X[:, spec.numeric_dims + c] = col.astype(np.float64)
    class_names = tuple(f"class_{k}" for k in range(k_classes))
    dataset = Dataset(schema, X, labels.astype(np.int64), class_names)

    # distance of each record from its LABEL's center drives return
    # fidelity: no dead zone, so even central records order smoothly
    dist = np.linalg.norm(X_num - centers[labels], axis=1)
    typical = np.sqrt(spec.numeric_dims)
    span = max(spec.class_separation, 1.0)
    u = np.clip(dist / (typical + span), 0.0, 1.0)

    beta_lo, beta_hi = spec.beta_range
    beta = beta_hi - (beta_hi - beta_lo) * u
    sigma = _BENCH_VOL * _NOISE_BASE_FRAC * np.exp(_NOISE_GAIN * u)

    drift = 0.002 * (1.0 + np.arange(k_classes))
    benchmark = drift[:, None] + _BENCH_VOL * rng.standard_normal(
        (k_classes, spec.horizon))
    eps = rng.standard_normal((n, spec.horizon))
    returns = beta[:, None] * benchmark[labels] + sigma[:, None] * eps

    return SyntheticBundle(
        dataset=dataset,
        returns_panel=returns,
        benchmark_panel=benchmark,
        is_injected=injected,
        center_distance=dist,
        spec=spec,
    )


def write_returns_csv(path, returns: np.ndarray) -> None:
    """Long-format record return series: record_id, period, return."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record_id", "period", "return"])
        for i in range(returns.shape[0]):
            for t in range(returns.shape[1]):
                writer.writerow([i, t, repr(float(returns[i, t]))])


def write_benchmarks_csv(path, benchmarks: np.ndarray,
                         class_names: tuple[str, ...]) -> None:
    """Long-format per-class benchmark series: class, period, return."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "period", "return"])
        for k in range(benchmarks.shape[0]):
            for t in range(benchmarks.shape[1]):
                writer.writerow([class_names[k], t, repr(float(benchmarks[k, t]))])


def write_truth_csv(path, is_injected: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record_id", "is_injected"])
        for i, flag in enumerate(is_injected):
            writer.writerow([i, "true" if flag else "false"])


def read_returns_csv(path):
    """Inverse of write_returns_csv; returns (n x horizon array)."""
    rows = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.setdefault(int(rec["record_id"]), {})[int(rec["period"])] = \
                float(rec["return"])
    if not rows:
        raise InvalidSpec(f"{path}: empty returns panel")
    n = max(rows) + 1
    horizon = max(max(periods) for periods in rows.values()) + 1
    out = np.full((n, horizon), np.nan)
    for i, periods in rows.items():
        for t, v in periods.items():
            out[i, t] = v
    return out


def read_benchmarks_csv(path):
    """Inverse of write_benchmarks_csv; returns dict class -> series."""
    rows: dict[str, dict[int, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.setdefault(rec["class"], {})[int(rec["period"])] = \
                float(rec["return"])
    out = {}
    for name, periods in rows.items():
        series = np.full(max(periods) + 1, np.nan)
        for t, v in periods.items():
            series[t] = v
        out[name] = series
    return out
