"""The numba kernels and their pure-numpy fallbacks must agree.

Integer outputs (routing, co-occurrence counts) and gini split decisions
are compared bit-for-bit; entropy/log-loss impurities involve a
transcendental whose last ulp may differ between numpy's SIMD log and
libm, so whole-forest comparisons for those criteria check predictions.
"""

import numpy as np
import pytest

from proxout import ForestParams, fit_forest, predict_proba
from proxout import _kernels
from proxout._backend import HAVE_NUMBA
from proxout.forest import forests_equal

from conftest import random_dataset

pytestmark = pytest.mark.skipif(not HAVE_NUMBA,
                                reason="numba unavailable; single backend")


def _node_inputs(seed, m=80, p=5, k=3):
    rng = np.random.default_rng(seed)
    X = np.ascontiguousarray(rng.normal(size=(m, p)))
    # duplicate some values to create threshold ties
    X[:, 1] = np.round(X[:, 1], 1)
    y = rng.integers(0, k, size=m).astype(np.int64)
    w = rng.uniform(0.5, 2.0, size=m)
    idx = rng.integers(0, m, size=m).astype(np.int64)
    feats = np.sort(rng.choice(p, size=3, replace=False)).astype(np.int64)
    return X, idx, feats, y, w, k


class TestSplitSearch:
    @pytest.mark.parametrize("criterion", [0, 1, 2])
    def test_identical_decisions(self, criterion):
        for seed in range(40):
            X, idx, feats, y, w, k = _node_inputs(seed)
            a = _kernels.split_search_numba(X, idx, feats, y, w, k,
                                            criterion, 1)
            b = _kernels.split_search_numpy(X, idx, feats, y, w, k,
                                            criterion, 1)
            assert a[0] == b[0]
            assert a[1] == b[1]  # bit-identical thresholds
            assert a[2] == pytest.approx(b[2], rel=1e-12)

    def test_gini_scores_bitwise(self):
        for seed in range(40):
            X, idx, feats, y, w, k = _node_inputs(seed + 1000)
            a = _kernels.split_search_numba(X, idx, feats, y, w, k, 0, 1)
            b = _kernels.split_search_numpy(X, idx, feats, y, w, k, 0, 1)
            assert a == b

    def test_min_leaf_respected_identically(self):
        for seed in range(20):
            X, idx, feats, y, w, k = _node_inputs(seed, m=12)
            a = _kernels.split_search_numba(X, idx, feats, y, w, k, 0, 4)
            b = _kernels.split_search_numpy(X, idx, feats, y, w, k, 0, 4)
            assert a == b


class TestTreeApply:
    def test_bitwise_equal_routing(self):
        rng = np.random.default_rng(0)
        d = random_dataset(rng, n=60, p=4, k=3)
        f = fit_forest(d, ForestParams(n_trees=6, seed=1))
        X = np.ascontiguousarray(d.X)
        for tree in f.trees:
            a = np.empty(d.n, dtype=np.int32)
            b = np.empty(d.n, dtype=np.int32)
            _kernels.tree_apply_numba(X, tree.feature, tree.threshold,
                                      tree.left, tree.right, tree.leaf_id, a)
            _kernels.tree_apply_numpy(X, tree.feature, tree.threshold,
                                      tree.left, tree.right, tree.leaf_id, b)
            assert np.array_equal(a, b)


class TestProximityKernels:
    def test_original_counts_equal(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            n = int(rng.integers(5, 60))
            leaves = rng.integers(0, 8, size=n).astype(np.int32)
            a = np.zeros((n, n), dtype=np.int32)
            b = np.zeros((n, n), dtype=np.int32)
            _kernels.prox_accumulate_numba(leaves, a)
            _kernels.prox_accumulate_numpy(leaves, b)
            assert np.array_equal(a, b)

    def test_oob_counts_equal(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            n = int(rng.integers(5, 60))
            leaves = rng.integers(0, 6, size=n).astype(np.int32)
            oob = rng.random(n) < 0.4
            num_a = np.zeros((n, n), dtype=np.int32)
            den_a = np.zeros((n, n), dtype=np.int32)
            num_b = np.zeros((n, n), dtype=np.int32)
            den_b = np.zeros((n, n), dtype=np.int32)
            _kernels.oob_prox_accumulate_numba(leaves, oob, num_a, den_a)
            _kernels.oob_prox_accumulate_numpy(leaves, oob, num_b, den_b)
            assert np.array_equal(num_a, num_b)
            assert np.array_equal(den_a, den_b)

    def test_gap_contributions_bitwise(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            n = int(rng.integers(5, 60))
            leaves = rng.integers(0, 6, size=n).astype(np.int32)
            oob = rng.random(n) < 0.4
            ibc = np.where(oob, 0, rng.integers(0, 4, size=n)).astype(np.float64)
            a = np.zeros((n, n))
            b = np.zeros((n, n))
            _kernels.gap_accumulate_numba(leaves, ibc, oob, a)
            _kernels.gap_accumulate_numpy(leaves, ibc, oob, b)
            assert np.array_equal(a, b)


class TestWholeForest:
    def test_gini_forests_structurally_identical(self, monkeypatch):
        rng = np.random.default_rng(4)
        d = random_dataset(rng, n=80, p=5, k=3)
        params = ForestParams(n_trees=10, seed=5, criterion="gini")
        f_nb = fit_forest(d, params)
        monkeypatch.setattr(_kernels, "split_search",
                            _kernels.split_search_numpy)
        f_np = fit_forest(d, params)
        assert forests_equal(f_nb, f_np)

    def test_entropy_forests_agree_on_predictions(self, monkeypatch):
        rng = np.random.default_rng(5)
        d = random_dataset(rng, n=80, p=5, k=3)
        params = ForestParams(n_trees=10, seed=6, criterion="entropy")
        f_nb = fit_forest(d, params)
        proba_nb = predict_proba(f_nb, d)
        monkeypatch.setattr(_kernels, "split_search",
                            _kernels.split_search_numpy)
        f_np = fit_forest(d, params)
        assert np.allclose(predict_proba(f_np, d), proba_nb, atol=1e-9)
