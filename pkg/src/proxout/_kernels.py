"""Hot numeric kernels: split search, tree routing, proximity accumulation.

Every kernel exists twice: a loop formulation compiled with numba and a
vectorized numpy fallback.  The pairs are written so that both produce
bit-identical output for integer work (routing, co-occurrence counts) and
for all float accumulations that influence control flow, by forcing the
same IEEE operation order on both sides (sequential cumulative sums, class
loops in ascending order, strict-improvement comparisons).  The lone
exception is the entropy/log-loss impurity, where numpy's SIMD log may
differ from libm in the last ulp.

The module-level aliases (``split_search``, ``tree_apply``, ...) point at
the implementation selected by :mod:`proxout._backend`.
"""

from __future__ import annotations

import math

import numpy as np

from ._backend import USE_NUMBA, jit

CRITERION_GINI = 0
CRITERION_ENTROPY = 1
CRITERION_LOG_LOSS = 2


# ---------------------------------------------------------------------------
# Best-split search
# ---------------------------------------------------------------------------

@jit
def _impurity_term(class_w, n_classes, criterion):
    # Weighted child impurity contribution: W * impurity(child), where the
    # class fractions use the weighted masses in class_w.  Scaled form keeps
    # the parent term out of the comparison (constant per node).
    total = 0.0
    for c in range(n_classes):
        total += class_w[c]
    if total <= 0.0:
        return 0.0
    if criterion == CRITERION_GINI:
        s2 = 0.0
        for c in range(n_classes):
            s2 += class_w[c] * class_w[c]
        return total - s2 / total
    term = 0.0
    for c in range(n_classes):
        wc = class_w[c]
        if wc > 0.0:
            if criterion == CRITERION_ENTROPY:
                term -= wc * math.log2(wc / total)
            else:
                term -= wc * math.log(wc / total)
    return term


def _split_search_loop(X, idx, feats, y, w, n_classes, criterion, min_leaf):
    # Returns (feature, threshold, score).  feature == -1 means no valid
    # split (all candidates constant or min_leaf unsatisfiable).  Candidate
    # features are scanned in the order given (callers pass them sorted
    # ascending) and thresholds ascending, with strict improvement, so ties
    # resolve to the lowest feature index, then the lowest threshold.
    m = idx.shape[0]
    total_w = np.zeros(n_classes, dtype=np.float64)
    for k in range(m):
        total_w[y[idx[k]]] += w[idx[k]]

    best_feat = -1
    best_thresh = 0.0
    best_score = -np.inf
    vals = np.empty(m, dtype=np.float64)
    left_w = np.empty(n_classes, dtype=np.float64)
    right_w = np.empty(n_classes, dtype=np.float64)

    for fi in range(feats.shape[0]):
        f = feats[fi]
        for k in range(m):
            vals[k] = X[idx[k], f]
        order = np.argsort(vals, kind="mergesort")
        if vals[order[0]] == vals[order[m - 1]]:
            continue
        for c in range(n_classes):
            left_w[c] = 0.0
        left_n = 0
        for k in range(m - 1):
            r = order[k]
            left_w[y[idx[r]]] += w[idx[r]]
            left_n += 1
            v = vals[r]
            v_next = vals[order[k + 1]]
            if v_next != v:
                if left_n >= min_leaf and (m - left_n) >= min_leaf:
                    for c in range(n_classes):
                        right_w[c] = total_w[c] - left_w[c]
                    score = -(
                        _impurity_term(left_w, n_classes, criterion)
                        + _impurity_term(right_w, n_classes, criterion)
                    )
                    if score > best_score:
                        best_score = score
                        best_feat = f
                        best_thresh = (v + v_next) * 0.5
    return best_feat, best_thresh, best_score


def split_search_numpy(X, idx, feats, y, w, n_classes, criterion, min_leaf):
    """Vectorized split search, rounding-compatible with the loop kernel."""
    m = idx.shape[0]
    y_node = y[idx]
    w_node = w[idx]
    total_w = np.zeros(n_classes, dtype=np.float64)
    np.add.at(total_w, y_node, w_node)  # sequential, matches the loop order

    best_feat = -1
    best_thresh = 0.0
    best_score = -np.inf
    for f in feats:
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        vs = vals[order]
        if vs[0] == vs[m - 1]:
            continue
        boundary = np.nonzero(vs[:-1] != vs[1:])[0]
        left_n = boundary + 1
        keep = (left_n >= min_leaf) & ((m - left_n) >= min_leaf)
        boundary = boundary[keep]
        if boundary.size == 0:
            continue
        onehot = np.zeros((m, n_classes), dtype=np.float64)
        onehot[np.arange(m), y_node[order]] = w_node[order]
        cum = np.cumsum(onehot, axis=0)
        left = cum[boundary]
        right = total_w[None, :] - left
        score = -(
            _impurity_term_numpy(left, n_classes, criterion)
            + _impurity_term_numpy(right, n_classes, criterion)
        )
        k = int(np.argmax(score))
        if score[k] > best_score:
            best_score = float(score[k])
            best_feat = int(f)
            b = boundary[k]
            best_thresh = float((vs[b] + vs[b + 1]) * 0.5)
    return best_feat, best_thresh, best_score


def _impurity_term_numpy(class_w, n_classes, criterion):
    # Class accumulation runs over columns in ascending order starting from
    # 0.0, mirroring the scalar loop exactly.
    nb = class_w.shape[0]
    total = np.zeros(nb)
    for c in range(n_classes):
        total += class_w[:, c]
    safe_total = np.where(total > 0.0, total, 1.0)
    if criterion == CRITERION_GINI:
        s2 = np.zeros(nb)
        for c in range(n_classes):
            s2 += class_w[:, c] * class_w[:, c]
        out = total - s2 / safe_total
    else:
        base = np.log2 if criterion == CRITERION_ENTROPY else np.log
        out = np.zeros(nb)
        for c in range(n_classes):
            wc = class_w[:, c]
            ratio = np.where(wc > 0.0, wc / safe_total, 1.0)
            out -= np.where(wc > 0.0, wc * base(ratio), 0.0)
    return np.where(total > 0.0, out, 0.0)


# ---------------------------------------------------------------------------
# Tree routing
# ---------------------------------------------------------------------------

def _tree_apply_loop(X, feature, threshold, left, right, leaf_id, out):
    n = X.shape[0]
    for i in range(n):
        node = 0
        while leaf_id[node] < 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = leaf_id[node]


def tree_apply_numpy(X, feature, threshold, left, right, leaf_id, out):
    """Route all rows through one tree, level-synchronous."""
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    while True:
        internal = leaf_id[node] < 0
        if not internal.any():
            break
        act = np.nonzero(internal)[0]
        nd = node[act]
        go_left = X[rows[act], feature[nd]] <= threshold[nd]
        node[act] = np.where(go_left, left[nd], right[nd])
    out[:] = leaf_id[node]


# ---------------------------------------------------------------------------
# Proximity accumulation (one tree per call; caller loops trees in order)
# ---------------------------------------------------------------------------

def _prox_accumulate_loop(leaves, counts):
    n = leaves.shape[0]
    order = np.argsort(leaves, kind="mergesort")
    start = 0
    while start < n:
        lv = leaves[order[start]]
        end = start + 1
        while end < n and leaves[order[end]] == lv:
            end += 1
        for a in range(start, end):
            ia = order[a]
            for b in range(start, end):
                counts[ia, order[b]] += 1
        start = end


def prox_accumulate_numpy(leaves, counts):
    """Add co-leaf indicators for one tree into the count matrix."""
    counts += leaves[:, None] == leaves[None, :]


def _oob_prox_accumulate_loop(leaves, oob, num, den):
    n = leaves.shape[0]
    ids = np.nonzero(oob)[0]
    k = ids.shape[0]
    for a in range(k):
        ia = ids[a]
        for b in range(k):
            ib = ids[b]
            den[ia, ib] += 1
            if leaves[ia] == leaves[ib]:
                num[ia, ib] += 1


def oob_prox_accumulate_numpy(leaves, oob, num, den):
    """Accumulate shared-OOB tree counts and co-leaf counts for one tree."""
    both = oob[:, None] & oob[None, :]
    den += both
    num += both & (leaves[:, None] == leaves[None, :])


def _gap_accumulate_loop(leaves, in_bag_counts, oob, asym):
    # For every out-of-bag record i, spread the in-bag multiplicities of its
    # co-leaf records, normalized by the leaf's total in-bag mass.  Leaf-group
    # members are visited in ascending record id (stable sort), which fixes
    # the accumulation order of the leaf mass.
    n = leaves.shape[0]
    order = np.argsort(leaves, kind="mergesort")
    start = 0
    while start < n:
        lv = leaves[order[start]]
        end = start + 1
        while end < n and leaves[order[end]] == lv:
            end += 1
        mass = 0.0
        for a in range(start, end):
            mass += in_bag_counts[order[a]]
        if mass > 0.0:
            for a in range(start, end):
                ia = order[a]
                if oob[ia]:
                    for b in range(start, end):
                        ib = order[b]
                        if in_bag_counts[ib] > 0.0:
                            asym[ia, ib] += in_bag_counts[ib] / mass
        start = end


def gap_accumulate_numpy(leaves, in_bag_counts, oob, asym):
    """Vectorized per-tree accumulation of in-bag-weighted co-leaf shares."""
    n = leaves.shape[0]
    order = np.argsort(leaves, kind="stable")
    sorted_leaves = leaves[order]
    starts = np.nonzero(
        np.concatenate((np.ones(1, dtype=bool), sorted_leaves[1:] != sorted_leaves[:-1]))
    )[0]
    group_of_sorted = np.cumsum(
        np.concatenate((np.zeros(1, dtype=np.int64),
                        (sorted_leaves[1:] != sorted_leaves[:-1]).astype(np.int64)))
    )
    mass = np.zeros(starts.shape[0])
    np.add.at(mass, group_of_sorted, in_bag_counts[order])  # ascending-id order
    group = np.empty(n, dtype=np.int64)
    group[order] = group_of_sorted
    leaf_mass = mass[group]
    rows = np.nonzero(oob & (leaf_mass > 0.0))[0]
    if rows.size == 0:
        return
    colleaf = leaves[rows][:, None] == leaves[None, :]
    contrib = np.where(
        colleaf & (in_bag_counts[None, :] > 0.0),
        in_bag_counts[None, :] / leaf_mass[rows][:, None],
        0.0,
    )
    asym[rows] += contrib


# ---------------------------------------------------------------------------
# Backend wiring
# ---------------------------------------------------------------------------

split_search_numba = jit(_split_search_loop)
tree_apply_numba = jit(_tree_apply_loop)
prox_accumulate_numba = jit(_prox_accumulate_loop)
oob_prox_accumulate_numba = jit(_oob_prox_accumulate_loop)
gap_accumulate_numba = jit(_gap_accumulate_loop)

if USE_NUMBA:
    split_search = split_search_numba
    tree_apply = tree_apply_numba
    prox_accumulate = prox_accumulate_numba
    oob_prox_accumulate = oob_prox_accumulate_numba
    gap_accumulate = gap_accumulate_numba
else:
    split_search = split_search_numpy
    tree_apply = tree_apply_numpy
    prox_accumulate = prox_accumulate_numpy
    oob_prox_accumulate = oob_prox_accumulate_numpy
    gap_accumulate = gap_accumulate_numpy
