"""Tabular dataset handling: schema, CSV ingestion, splits, class weights.

Records are stored as a dense float64 matrix.  Categorical columns are
integer-coded against a per-column vocabulary kept on the schema, so a
model trained on one file can score another with consistent codes.
Missing cells are NaN-coded until :func:`impute_zero` resolves them.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

MISSING_TOKEN = "__MISSING__"

NUMERIC = "numeric"
CATEGORICAL = "categorical"


class DataError(ValueError):
    """Base class for dataset construction and ingestion failures."""


class MissingColumn(DataError):
    pass


class UnparsableCell(DataError):
    def __init__(self, row: int, col: str, value: str):
        super().__init__(f"cannot parse {value!r} at row {row}, column {col!r}")
        self.row = row
        self.col = col


class UnknownCategory(DataError):
    pass


class EmptyFile(DataError):
    pass


class ClassTooSmall(DataError):
    pass


class ClassSmallerThanK(DataError):
    pass


class AbsentClass(DataError):
    pass


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature columns with kinds, plus the label column name.

    ``vocabularies`` maps each categorical column to its ordered value
    vocabulary; it is empty until a dataset is loaded against the schema
    (the loader returns a vocabularized copy on the Dataset).
    """

    columns: tuple[tuple[str, str], ...]
    label_column: str
    vocabularies: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        names = [c for c, _ in self.columns]
        if len(set(names)) != len(names):
            raise DataError("duplicate feature column names")
        if self.label_column in names:
            raise DataError("label column listed among feature columns")
        if not names:
            raise DataError("schema needs at least one feature column")
        for _, kind in self.columns:
            if kind not in (NUMERIC, CATEGORICAL):
                raise DataError(f"unknown column kind {kind!r}")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(c for c, _ in self.columns)

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(k for _, k in self.columns)

    def to_dict(self) -> dict:
        return {
            "columns": [list(c) for c in self.columns],
            "label_column": self.label_column,
            "vocabularies": {k: list(v) for k, v in sorted(self.vocabularies.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(
            columns=tuple((str(n), str(k)) for n, k in d["columns"]),
            label_column=str(d["label_column"]),
            vocabularies={k: tuple(v) for k, v in d.get("vocabularies", {}).items()},
        )


@dataclass(frozen=True)
class Dataset:
    """Immutable labeled table: coded features, class ids, class names.

    ``X`` is n x p float64 (categoricals coded to vocabulary indices,
    missing cells NaN).  ``y`` holds contiguous class ids aligned with
    ``class_names`` (sorted label order, so the coding does not depend on
    row order).
    """

    schema: FeatureSchema
    X: np.ndarray
    y: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        self.X.setflags(write=False)
        self.y.setflags(write=False)
        if self.X.shape[0] != self.y.shape[0]:
            raise DataError("feature matrix and labels disagree on record count")
        if self.X.shape[1] != len(self.schema.columns):
            raise DataError("feature matrix and schema disagree on column count")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.n_classes)

    def take(self, indices: np.ndarray) -> "Dataset":
        """Row subset (class id coding and schema preserved)."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.schema, self.X[idx].copy(), self.y[idx].copy(),
                       self.class_names)


@dataclass(frozen=True)
class FoldPlan:
    """Stratified fold assignment: one fold id in 0..k-1 per record."""

    k: int
    assignments: np.ndarray
    seed: int

    def __post_init__(self):
        self.assignments.setflags(write=False)

    def fold_indices(self, fold: int) -> np.ndarray:
        return np.nonzero(self.assignments == fold)[0]

    def complement_indices(self, fold: int) -> np.ndarray:
        return np.nonzero(self.assignments != fold)[0]


def dataset_from_arrays(
    X: np.ndarray,
    labels,
    kinds: tuple[str, ...] | None = None,
    feature_names: tuple[str, ...] | None = None,
    label_column: str = "label",
) -> Dataset:
    """Build a Dataset from an in-memory numeric matrix and label sequence."""
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    labels = [str(v) for v in labels]
    p = X.shape[1]
    if feature_names is None:
        feature_names = tuple(f"f{i}" for i in range(p))
    if kinds is None:
        kinds = (NUMERIC,) * p
    schema = FeatureSchema(tuple(zip(feature_names, kinds)), label_column)
    class_names = tuple(sorted(set(labels)))
    index = {c: i for i, c in enumerate(class_names)}
    y = np.array([index[v] for v in labels], dtype=np.int64)
    return Dataset(schema, X, y, class_names)


def load_csv(path, schema: FeatureSchema) -> Dataset:
    """Parse an RFC-4180 CSV against ``schema``.

    The header must contain every schema column plus the label column;
    extra columns are ignored.  Empty cells become missing markers (NaN).
    Categorical vocabularies come from the schema when present, otherwise
    from the observed values in sorted order.

    Raises MissingColumn, UnparsableCell, UnknownCategory, EmptyFile.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path}: no header row")
        rows = list(reader)
    if not rows:
        raise EmptyFile(f"{path}: header only, no records")

    positions = {}
    for name in schema.feature_names + (schema.label_column,):
        if name not in header:
            raise MissingColumn(f"{path}: column {name!r} not in header")
        positions[name] = header.index(name)

    n = len(rows)
    p = len(schema.columns)
    X = np.empty((n, p), dtype=np.float64)
    raw_labels = []
    raw_cats: dict[int, list[str]] = {
        j: [] for j, (_, kind) in enumerate(schema.columns) if kind == CATEGORICAL
    }

    for i, row in enumerate(rows):
        for j, (name, kind) in enumerate(schema.columns):
            cell = row[positions[name]].strip() if positions[name] < len(row) else ""
            if kind == NUMERIC:
                if cell == "":
                    X[i, j] = np.nan
                else:
                    try:
                        X[i, j] = float(cell)
                    except ValueError:
                        raise UnparsableCell(i, name, cell)
            else:
                raw_cats[j].append(cell)
        label_cell = row[positions[schema.label_column]].strip() \
            if positions[schema.label_column] < len(row) else ""
        if label_cell == "":
            raise UnparsableCell(i, schema.label_column, label_cell)
        raw_labels.append(label_cell)

    vocabularies = dict(schema.vocabularies)
    for j, (name, kind) in enumerate(schema.columns):
        if kind != CATEGORICAL:
            continue
        cells = raw_cats[j]
        if name in vocabularies:
            vocab = vocabularies[name]
        else:
            vocab = tuple(sorted({c for c in cells if c != ""}))
            vocabularies[name] = vocab
        code = {v: float(ci) for ci, v in enumerate(vocab)}
        for i, cell in enumerate(cells):
            if cell == "":
                X[i, j] = np.nan
            elif cell in code:
                X[i, j] = code[cell]
            else:
                raise UnknownCategory(
                    f"{path}: value {cell!r} at row {i} not in vocabulary of {name!r}"
                )

    vocab_schema = replace(schema, vocabularies=vocabularies)
    class_names = tuple(sorted(set(raw_labels)))
    index = {c: i for i, c in enumerate(class_names)}
    y = np.array([index[v] for v in raw_labels], dtype=np.int64)
    return Dataset(vocab_schema, X, y, class_names)


def impute_zero(d: Dataset) -> Dataset:
    """Replace missing cells: numeric -> 0, categorical -> reserved token.

    The reserved token is appended to the end of the affected vocabularies
    so existing codes stay stable.  Idempotent.
    """
    X = d.X.copy()
    vocabularies = dict(d.schema.vocabularies)
    for j, (name, kind) in enumerate(d.schema.columns):
        missing = np.isnan(X[:, j])
        if not missing.any():
            continue
        if kind == NUMERIC:
            X[missing, j] = 0.0
        else:
            vocab = vocabularies.get(name, ())
            if MISSING_TOKEN not in vocab:
                vocab = vocab + (MISSING_TOKEN,)
                vocabularies[name] = vocab
            X[missing, j] = float(vocab.index(MISSING_TOKEN))
    schema = replace(d.schema, vocabularies=vocabularies)
    return Dataset(schema, X, d.y.copy(), d.class_names)


def _canonical_member_order(d: Dataset, members: np.ndarray) -> np.ndarray:
    # Order class members by row content (then position for exact ties) so
    # seeded selections do not depend on the row order of the input file.
    sub = d.X[members]
    keys = [members] + [sub[:, j] for j in range(sub.shape[1] - 1, -1, -1)]
    return members[np.lexsort(keys)]


def stratified_split_indices(d: Dataset, test_fraction: float, seed: int):
    """Index arrays (train, test) for a seeded stratified split.

    Per-class test counts follow largest-remainder apportionment of
    ``n * test_fraction`` across classes, so each class lands within one
    record of its proportional share.  Selection shuffles a canonical
    content-ordering of each class, making the partition of record
    identities invariant to input row permutations (for distinct rows).

    Raises ClassTooSmall when any class has fewer than 2 records.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DataError("test_fraction must lie in (0, 1)")
    counts = d.class_counts()
    for j, c in enumerate(counts):
        if c < 2:
            raise ClassTooSmall(f"class {d.class_names[j]!r} has {c} record(s)")
    n_test_total = int(round(d.n * test_fraction))
    ideal = counts * test_fraction
    base = np.floor(ideal).astype(np.int64)
    remainder = int(n_test_total - base.sum())
    if remainder > 0:
        frac_order = np.lexsort((np.arange(len(counts)), -(ideal - base)))
        for j in frac_order[:remainder]:
            base[j] += 1
    base = np.minimum(base, counts)

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    test_mask = np.zeros(d.n, dtype=bool)
    for j in range(d.n_classes):
        members = np.nonzero(d.y == j)[0]
        ordered = _canonical_member_order(d, members)
        perm = rng.permutation(len(ordered))
        chosen = ordered[perm[: base[j]]]
        test_mask[chosen] = True
    return np.nonzero(~test_mask)[0], np.nonzero(test_mask)[0]


def stratified_split(d: Dataset, test_fraction: float, seed: int):
    """Seeded stratified (train, test) dataset pair; see the index variant."""
    train_idx, test_idx = stratified_split_indices(d, test_fraction, seed)
    return d.take(train_idx), d.take(test_idx)


def stratified_kfold(d: Dataset, k: int, seed: int) -> FoldPlan:
    """Seeded stratified k-fold plan.

    Each class is dealt into folds in near-equal chunks (largest folds
    first, rotated across classes to even out fold totals).  Raises
    ClassSmallerThanK when a class has fewer than k records.
    """
    if k < 2:
        raise DataError("k must be at least 2")
    counts = d.class_counts()
    for j, c in enumerate(counts):
        if c < k:
            raise ClassSmallerThanK(
                f"class {d.class_names[j]!r} has {c} record(s), needs >= {k}"
            )
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    assignments = np.empty(d.n, dtype=np.int64)
    offset = 0
    for j in range(d.n_classes):
        members = np.nonzero(d.y == j)[0]
        ordered = _canonical_member_order(d, members)
        perm = rng.permutation(len(ordered))
        shuffled = ordered[perm]
        m = len(shuffled)
        sizes = np.full(k, m // k, dtype=np.int64)
        sizes[: m % k] += 1
        sizes = np.roll(sizes, offset % k)
        offset += m % k
        pos = 0
        for f in range(k):
            assignments[shuffled[pos: pos + sizes[f]]] = f
            pos += sizes[f]
    return FoldPlan(k=k, assignments=assignments, seed=seed)


def balanced_class_weights(y: np.ndarray, n_classes: int) -> np.ndarray:
    """Per-class weights n / (K * n_J); equalizes total class mass.

    Raises AbsentClass when some class id in 0..K-1 has no records.
    """
    counts = np.bincount(np.asarray(y, dtype=np.int64), minlength=n_classes)
    for j in range(n_classes):
        if counts[j] == 0:
            raise AbsentClass(f"class id {j} has no records")
    n = counts.sum()
    return n / (n_classes * counts.astype(np.float64))


def resolve_class_weights(spec, y: np.ndarray, n_classes: int) -> np.ndarray:
    """Accept 'balanced', 'uniform', or an explicit per-class vector."""
    if isinstance(spec, str):
        if spec == "balanced":
            return balanced_class_weights(y, n_classes)
        if spec == "uniform":
            return np.ones(n_classes, dtype=np.float64)
        raise DataError(f"unknown class weight spec {spec!r}")
    w = np.asarray(spec, dtype=np.float64)
    if w.shape != (n_classes,):
        raise DataError("class weight vector length must equal class count")
    if not np.all(w > 0) or not np.all(np.isfinite(w)):
        raise DataError("class weights must be positive and finite")
    return w


def write_csv(path, d: Dataset) -> None:
    """Write a dataset back out (categoricals decoded, label last)."""
    vocab = {
        name: d.schema.vocabularies.get(name, ())
        for name, kind in d.schema.columns
        if kind == CATEGORICAL
    }
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(d.schema.feature_names) + [d.schema.label_column])
        for i in range(d.n):
            row = []
            for j, (name, kind) in enumerate(d.schema.columns):
                v = d.X[i, j]
                if math.isnan(v):
                    row.append("")
                elif kind == CATEGORICAL:
                    row.append(vocab[name][int(v)])
                else:
                    row.append(repr(float(v)))
            row.append(d.class_names[d.y[i]])
            writer.writerow(row)
