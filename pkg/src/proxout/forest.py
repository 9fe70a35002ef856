"""Bootstrap ensembles of CART classification trees.

Trees grow on bootstrap multisets with class-weighted impurity; the
ensemble records per-tree bootstrap multiplicities so out-of-bag
bookkeeping and proximity variants can be derived later.  All randomness
for tree t comes from a stream keyed by (seed, t), so results do not
depend on growth scheduling.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data import Dataset, FeatureSchema, resolve_class_weights

_UNBOUNDED_DEPTH = 2**31 - 1

CRITERIA = {
    "gini": _kernels.CRITERION_GINI,
    "entropy": _kernels.CRITERION_ENTROPY,
    "log_loss": _kernels.CRITERION_LOG_LOSS,
}

MAX_FEATURES_MODES = ("sqrt", "log2", "all")

FOREST_FORMAT = "proxout-forest"
FOREST_VERSION = 1


class ForestError(ValueError):
    pass


class InvalidParams(ForestError):
    pass


class SingleClassInput(ForestError):
    pass


class SchemaMismatch(ForestError):
    pass


@dataclass(frozen=True)
class ForestParams:
    """Ensemble hyperparameters.

    max_depth None means grow to purity.  class_weights is 'balanced',
    'uniform', or an explicit per-class vector.
    """

    n_trees: int = 100
    max_depth: int | None = None
    max_features: str = "sqrt"
    criterion: str = "gini"
    min_samples_leaf: int = 1
    class_weights: object = "balanced"
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise InvalidParams("n_trees must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise InvalidParams("max_depth must be >= 1 when bounded")
        if self.max_features not in MAX_FEATURES_MODES:
            raise InvalidParams(f"max_features must be one of {MAX_FEATURES_MODES}")
        if self.criterion not in CRITERIA:
            raise InvalidParams(f"criterion must be one of {tuple(CRITERIA)}")
        if self.min_samples_leaf < 1:
            raise InvalidParams("min_samples_leaf must be >= 1")

    def to_dict(self) -> dict:
        cw = self.class_weights
        if isinstance(cw, np.ndarray):
            cw = [float(v) for v in cw]
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "max_features": self.max_features,
            "criterion": self.criterion,
            "min_samples_leaf": self.min_samples_leaf,
            "class_weights": cw,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForestParams":
        cw = d.get("class_weights", "balanced")
        if isinstance(cw, list):
            cw = np.asarray(cw, dtype=np.float64)
        return cls(
            n_trees=int(d["n_trees"]),
            max_depth=None if d.get("max_depth") is None else int(d["max_depth"]),
            max_features=str(d.get("max_features", "sqrt")),
            criterion=str(d.get("criterion", "gini")),
            min_samples_leaf=int(d.get("min_samples_leaf", 1)),
            class_weights=cw,
            seed=int(d.get("seed", 0)),
        )


@dataclass
class DecisionTree:
    """One grown tree as flat node arrays (preorder).

    feature/left/right/leaf_id are -1 on the side that does not apply:
    internal nodes carry feature+threshold+children, leaves carry a leaf
    ordinal into ``leaf_dist`` (rows sum to 1).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_id: np.ndarray
    leaf_dist: np.ndarray
    depth: int

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def n_leaves(self) -> int:
        return self.leaf_dist.shape[0]

    def apply(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0], dtype=np.int32)
        _kernels.tree_apply(X, self.feature, self.threshold, self.left,
                            self.right, self.leaf_id, out)
        return out


@dataclass
class Forest:
    """Trained ensemble plus bootstrap bookkeeping and training schema."""

    trees: list[DecisionTree]
    bootstrap_counts: np.ndarray  # T x n multiplicities of each training record
    class_names: tuple[str, ...]
    params: ForestParams
    schema: FeatureSchema
    class_weight_vector: np.ndarray

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_train(self) -> int:
        return self.bootstrap_counts.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


class _TreeBuilder:
    def __init__(self, X, y, w, n_classes, params, rng):
        self.X = X
        self.y = y
        self.w = w
        self.n_classes = n_classes
        self.params = params
        self.rng = rng
        p = X.shape[1]
        if params.max_features == "sqrt":
            self.n_sub = int(math.ceil(math.sqrt(p)))
        elif params.max_features == "log2":
            self.n_sub = max(1, int(math.ceil(math.log2(p)))) if p > 1 else 1
        else:
            self.n_sub = p
        self.max_depth = params.max_depth or _UNBOUNDED_DEPTH
        self.criterion = CRITERIA[params.criterion]
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.leaf_id = []
        self.leaf_dist = []
        self.depth = 0

    def build(self, idx: np.ndarray) -> DecisionTree:
        self._grow(idx, 0)
        return DecisionTree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            leaf_id=np.asarray(self.leaf_id, dtype=np.int32),
            leaf_dist=(np.asarray(self.leaf_dist, dtype=np.float64)
                       if self.leaf_dist else np.zeros((0, self.n_classes))),
            depth=self.depth,
        )

    def _new_node(self):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.leaf_id.append(-1)
        return len(self.feature) - 1

    def _make_leaf(self, node, idx):
        mass = np.bincount(self.y[idx], weights=self.w[idx],
                           minlength=self.n_classes)
        self.leaf_id[node] = len(self.leaf_dist)
        self.leaf_dist.append(mass / mass.sum())

    def _grow(self, idx, depth) -> int:
        node = self._new_node()
        self.depth = max(self.depth, depth)
        m = idx.shape[0]
        first = self.y[idx[0]]
        pure = bool(np.all(self.y[idx] == first))
        if (pure or depth >= self.max_depth
                or m < 2 * self.params.min_samples_leaf or m < 2):
            self._make_leaf(node, idx)
            return node
        feats = np.sort(self.rng.choice(self.X.shape[1], size=self.n_sub,
                                        replace=False)).astype(np.int64)
        f, thr, _ = _kernels.split_search(
            self.X, idx, feats, self.y, self.w,
            self.n_classes, self.criterion, self.params.min_samples_leaf,
        )
        if f < 0:  # all candidates constant or min_samples_leaf unsatisfiable
            self._make_leaf(node, idx)
            return node
        go_left = self.X[idx, f] <= thr
        self.feature[node] = int(f)
        self.threshold[node] = float(thr)
        self.left[node] = self._grow(idx[go_left], depth + 1)
        self.right[node] = self._grow(idx[~go_left], depth + 1)
        return node


def _tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(tree_index,))
    )


def fit_forest(train: Dataset, params: ForestParams) -> Forest:
    """Grow ``params.n_trees`` trees on seeded bootstrap samples of ``train``.

    Record weights during impurity scoring and in leaf distributions equal
    the class weight of the record's label; the bootstrap itself is
    unweighted sampling with replacement of n record ids.

    Raises SingleClassInput when the training data has fewer than 2
    classes, InvalidParams on bad hyperparameters.
    """
    if train.n_classes < 2:
        raise SingleClassInput("training data must contain at least 2 classes")
    X = np.ascontiguousarray(train.X, dtype=np.float64)
    if np.isnan(X).any():
        raise ForestError("training data contains missing cells; impute first")
    y = train.y.astype(np.int64)
    w = resolve_class_weights(params.class_weights, y, train.n_classes)
    w_rec = w[y]
    n = train.n
    trees = []
    boot_counts = np.zeros((params.n_trees, n), dtype=np.int32)
    for t in range(params.n_trees):
        rng = _tree_rng(params.seed, t)
        sample = rng.integers(0, n, size=n)
        boot_counts[t] = np.bincount(sample, minlength=n)
        builder = _TreeBuilder(X, y, w_rec, train.n_classes, params, rng)
        trees.append(builder.build(np.sort(sample).astype(np.int64)))
    return Forest(
        trees=trees,
        bootstrap_counts=boot_counts,
        class_names=train.class_names,
        params=params,
        schema=train.schema,
        class_weight_vector=w,
    )


def _check_schema(forest: Forest, d: Dataset) -> None:
    fs, ds = forest.schema, d.schema
    if fs.columns != ds.columns or fs.label_column != ds.label_column:
        raise SchemaMismatch("dataset columns differ from the training schema")
    for name, kind in fs.columns:
        if kind == "categorical":
            if fs.vocabularies.get(name) != ds.vocabularies.get(name):
                raise SchemaMismatch(
                    f"categorical vocabulary of {name!r} differs from training"
                )


def apply(forest: Forest, d: Dataset) -> np.ndarray:
    """Leaf-ordinal matrix, entry (i, t) = leaf of tree t reached by row i."""
    _check_schema(forest, d)
    X = np.ascontiguousarray(d.X, dtype=np.float64)
    out = np.empty((d.n, forest.n_trees), dtype=np.int32)
    for t, tree in enumerate(forest.trees):
        out[:, t] = tree.apply(X)
    return out


def predict_proba(forest: Forest, d: Dataset) -> np.ndarray:
    """Row-stochastic class probabilities: mean of leaf distributions."""
    leaves = apply(forest, d)
    acc = np.zeros((d.n, forest.n_classes), dtype=np.float64)
    for t, tree in enumerate(forest.trees):
        acc += tree.leaf_dist[leaves[:, t]]
    return acc / forest.n_trees


def predict(forest: Forest, d: Dataset) -> np.ndarray:
    """Argmax class ids; ties resolve to the smaller class id."""
    return np.argmax(predict_proba(forest, d), axis=1).astype(np.int64)


def oob_indicator(forest: Forest) -> np.ndarray:
    """n x T booleans: True where record i was absent from tree t's bootstrap."""
    return (forest.bootstrap_counts == 0).T.copy()


def forests_equal(a: Forest, b: Forest) -> bool:
    """Structural equality: same splits, thresholds, leaves, bootstraps."""
    if a.n_trees != b.n_trees or a.class_names != b.class_names:
        return False
    if not np.array_equal(a.bootstrap_counts, b.bootstrap_counts):
        return False
    for ta, tb in zip(a.trees, b.trees):
        if ta.depth != tb.depth:
            return False
        for fa, fb in (
            (ta.feature, tb.feature), (ta.threshold, tb.threshold),
            (ta.left, tb.left), (ta.right, tb.right),
            (ta.leaf_id, tb.leaf_id), (ta.leaf_dist, tb.leaf_dist),
        ):
            if not np.array_equal(fa, fb):
                return False
    return True


def forest_to_dict(forest: Forest) -> dict:
    return {
        "format": FOREST_FORMAT,
        "version": FOREST_VERSION,
        "params": forest.params.to_dict(),
        "class_names": list(forest.class_names),
        "class_weight_vector": [float(v) for v in forest.class_weight_vector],
        "schema": forest.schema.to_dict(),
        "bootstrap_counts": forest.bootstrap_counts.tolist(),
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "leaf_id": t.leaf_id.tolist(),
                "leaf_dist": t.leaf_dist.tolist(),
                "depth": t.depth,
            }
            for t in forest.trees
        ],
    }


def forest_from_dict(d: dict) -> Forest:
    if d.get("format") != FOREST_FORMAT:
        raise ForestError("not a forest file")
    if d.get("version") != FOREST_VERSION:
        raise ForestError(f"unsupported forest file version {d.get('version')}")
    trees = [
        DecisionTree(
            feature=np.asarray(t["feature"], dtype=np.int32),
            threshold=np.asarray(t["threshold"], dtype=np.float64),
            left=np.asarray(t["left"], dtype=np.int32),
            right=np.asarray(t["right"], dtype=np.int32),
            leaf_id=np.asarray(t["leaf_id"], dtype=np.int32),
            leaf_dist=np.asarray(t["leaf_dist"], dtype=np.float64),
            depth=int(t["depth"]),
        )
        for t in d["trees"]
    ]
    return Forest(
        trees=trees,
        bootstrap_counts=np.asarray(d["bootstrap_counts"], dtype=np.int32),
        class_names=tuple(d["class_names"]),
        params=ForestParams.from_dict(d["params"]),
        schema=FeatureSchema.from_dict(d["schema"]),
        class_weight_vector=np.asarray(d["class_weight_vector"], dtype=np.float64),
    )


def save_forest(path, forest: Forest) -> None:
    """Write the versioned JSON model file (layout documented in README)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(forest_to_dict(forest), fh, separators=(",", ":"))


def load_forest(path) -> Forest:
    with open(path, encoding="utf-8") as fh:
        return forest_from_dict(json.load(fh))
