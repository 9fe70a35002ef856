"""Class-wise outlier measures built on proximity matrices.

For record i and class J the chain is: squared-proximity mass to the
class members (excluding i itself when i belongs to J), its inverse
scaled by the class size, and a robust standardization by the median and
median absolute deviation of the in-class values.  When i does not
belong to J, i's own raw value joins the median/deviation pool, so a
foreign record is judged against the class as if it were a candidate
member.  Larger measures mean farther from the class.

Records with zero proximity mass to a class carry an infinite raw
measure; they are excluded from median/deviation pools, sort above all
finite scores, and are always flagged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .proximity import ProximityMatrix

EPS_DEV = 1e-12

MAD = "mad"            # median absolute deviation from the median
MEAN_AD = "mean_ad"    # mean absolute deviation from the median

ANCHOR_MEAN = "mean"
ANCHOR_ZERO = "zero"


class OutlierError(ValueError):
    pass


class EmptyClass(OutlierError):
    pass


class SingletonOwnClass(OutlierError):
    pass


@dataclass
class OutlierScores:
    """Per-record, per-class outlier measures plus flags and quartiles.

    ``avg_prox``, ``raw`` and ``measure`` are n x K; ``med``/``dev`` hold
    the per-class in-class standardization constants actually used.
    ``flags`` are within-own-class outlier flags at ``k_sigma``;
    ``novelty`` marks records above the flag threshold of every class.
    ``quartiles`` rank records within their own class (4 = most outlying);
    classes smaller than 4 records collapse to quartile 1 and are marked
    in ``small_quartile_classes``.
    """

    labels: np.ndarray
    class_names: tuple[str, ...]
    avg_prox: np.ndarray
    raw: np.ndarray
    measure: np.ndarray
    med: np.ndarray
    dev: np.ndarray
    thresholds: np.ndarray
    flags: np.ndarray
    novelty: np.ndarray
    quartiles: np.ndarray
    small_quartile_classes: np.ndarray
    k_sigma: float
    deviation: str
    anchor: str

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def measure_own(self) -> np.ndarray:
        return self.measure[np.arange(self.n), self.labels]


def _class_members(labels: np.ndarray, j: int) -> np.ndarray:
    return np.nonzero(labels == j)[0]


def class_average_proximity(p: ProximityMatrix, labels: np.ndarray,
                            i: int, j: int) -> float:
    """Squared-proximity mass of record i to class j, excluding i itself.

    Raises EmptyClass when class j has no members, SingletonOwnClass when
    i is the only member of its own class.
    """
    members = _class_members(labels, j)
    if members.size == 0:
        raise EmptyClass(f"class id {j} has no members")
    own = labels[i] == j
    if own and members.size < 2:
        raise SingletonOwnClass(f"record {i} is the only member of class {j}")
    row = p.values[i, members]
    total = float(np.sum(row * row))
    if own:
        total -= float(p.values[i, i] ** 2)
    return total


def average_proximity_matrix(p: ProximityMatrix, labels: np.ndarray,
                             n_classes: int) -> np.ndarray:
    """n x K matrix of squared-proximity class masses (self excluded)."""
    n = p.n
    sq = np.asarray(p.values) ** 2
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), labels] = 1.0
    sums = sq @ onehot
    sums[np.arange(n), labels] -= np.diagonal(sq)
    return sums


def raw_outlier(p: ProximityMatrix, labels: np.ndarray, j: int) -> np.ndarray:
    """Raw measure n_J / mass for every record against class j.

    Records with zero mass map to +inf.  Raises EmptyClass.
    """
    members = _class_members(labels, j)
    if members.size == 0:
        raise EmptyClass(f"class id {j} has no members")
    n_classes = int(labels.max()) + 1
    avg = average_proximity_matrix(p, labels, n_classes)[:, j]
    return _raw_from_avg(avg, members.size)


def _raw_from_avg(avg: np.ndarray, n_j: int) -> np.ndarray:
    out = np.full(avg.shape, np.inf)
    pos = avg > 0.0
    out[pos] = n_j / avg[pos]
    return out


def _pool_deviation(pool_abs: np.ndarray, deviation: str, axis=None):
    """Deviation of |raw - median| per convention, with a degeneracy fallback.

    A median absolute deviation of exactly 0 (over half the pool sits at
    the median) falls back to the mean absolute deviation, so records that
    do deviate still get a finite standardized measure; only a pool with no
    spread at all stays degenerate.
    """
    if deviation == MAD:
        dev = np.median(pool_abs, axis=axis)
        mean_dev = np.mean(pool_abs, axis=axis)
        return np.where(dev < EPS_DEV, mean_dev, dev) if axis is not None \
            else (mean_dev if dev < EPS_DEV else dev)
    if deviation == MEAN_AD:
        return np.mean(pool_abs, axis=axis)
    raise OutlierError(f"unknown deviation convention {deviation!r}")


def _degenerate_measure(raw_value, med):
    # Zero deviation: records at the pool median are exactly typical; any
    # other value is infinitely far, signed by which side it sits on.
    if abs(raw_value - med) < EPS_DEV:
        return 0.0
    return np.inf if raw_value > med else -np.inf


def outlier_measure(p: ProximityMatrix, labels: np.ndarray, j: int,
                    deviation: str = MAD) -> np.ndarray:
    """Final standardized measure of every record against class j.

    In-class records are standardized by the median/deviation of the
    in-class raw values; each foreign record joins the pool for its own
    evaluation.  A degenerate deviation yields 0 for records at the pool
    median and a signed infinity otherwise.
    """
    members = _class_members(labels, j)
    if members.size == 0:
        raise EmptyClass(f"class id {j} has no members")
    if members.size < 2:
        raise EmptyClass(f"class id {j} needs at least 2 members")
    raws = raw_outlier(p, labels, j)
    return standardize_raw(raws, labels == j, deviation)[0]


def standardize_raw(raws, own_mask, deviation=MAD):
    """Median/deviation standardization of raw measures against one class.

    ``own_mask`` marks the class members whose finite raw values form the
    standardization pool; every non-member is evaluated against the pool
    extended with its own raw value.  Returns (measure vector, in-class
    median, in-class deviation).
    """
    n = raws.shape[0]
    out = np.empty(n)
    in_raws = raws[own_mask]
    finite_in = np.sort(in_raws[np.isfinite(in_raws)])
    if finite_in.size == 0:
        # every member has zero proximity mass: all infinitely atypical
        out[:] = np.inf
        return out, np.nan, np.nan
    med = float(np.median(finite_in))
    dev = float(_pool_deviation(np.abs(finite_in - med), deviation))

    # in-class records
    own_idx = np.nonzero(own_mask)[0]
    for i in own_idx:
        r = raws[i]
        if not np.isfinite(r):
            out[i] = np.inf
        elif dev < EPS_DEV:
            out[i] = _degenerate_measure(r, med)
        else:
            out[i] = (r - med) / dev

    # foreign records: pool = finite in-class raws + the record's own raw
    fr_idx = np.nonzero(~own_mask)[0]
    if fr_idx.size:
        fr = raws[fr_idx]
        finite = np.isfinite(fr)
        out[fr_idx[~finite]] = np.inf
        fi = fr_idx[finite]
        if fi.size:
            r = fr[finite]
            m = finite_in.size
            pos = np.searchsorted(finite_in, r)
            med_i = _merged_median(finite_in, r, pos)
            pool_abs = np.abs(finite_in[None, :] - med_i[:, None])
            pool_abs = np.concatenate(
                (pool_abs, np.abs(r - med_i)[:, None]), axis=1)
            dev_i = _pool_deviation(pool_abs, deviation, axis=1)
            delta = r - med_i
            degenerate = np.where(np.abs(delta) < EPS_DEV, 0.0,
                                  np.where(delta > 0, np.inf, -np.inf))
            val = np.where(dev_i < EPS_DEV, degenerate,
                           delta / np.where(dev_i < EPS_DEV, 1.0, dev_i))
            out[fi] = val
    return out, med, dev


def _merged_median(sorted_base: np.ndarray, extras: np.ndarray,
                   pos: np.ndarray) -> np.ndarray:
    """Median of sorted_base with one extra value inserted, per extra."""
    m = sorted_base.size
    total = m + 1

    def merged_at(k):
        k_arr = np.full(extras.shape, k)
        below = k_arr < pos
        at = k_arr == pos
        base_lo = sorted_base[np.minimum(k_arr, m - 1)]
        base_hi = sorted_base[np.clip(k_arr - 1, 0, m - 1)]
        return np.where(below, base_lo, np.where(at, extras, base_hi))

    if total % 2 == 1:
        return merged_at(total // 2)
    return 0.5 * (merged_at(total // 2 - 1) + merged_at(total // 2))


def within_class_outliers(scores: "OutlierScores", k_sigma: float = 2.0,
                          anchor: str | None = None) -> np.ndarray:
    """Re-derive within-class outlier flags at a different threshold."""
    flags, _ = _flag_outliers(
        scores.measure_own(), scores.labels, scores.n_classes,
        k_sigma=k_sigma, anchor=scores.anchor if anchor is None else anchor)
    return flags


def _flag_outliers(measure_own: np.ndarray, labels: np.ndarray,
                   n_classes: int, k_sigma: float = 2.0,
                   anchor: str = ANCHOR_MEAN):
    """Flag records whose own-class measure exceeds anchor + k_sigma * std.

    Statistics are per class over finite measures; infinite measures are
    flagged whenever the class threshold is finite.  Returns (flags,
    per-class thresholds).
    """
    flags = np.zeros(measure_own.shape[0], dtype=bool)
    thresholds = np.full(n_classes, np.inf)
    for j in range(n_classes):
        members = _class_members(labels, j)
        if members.size == 0:
            continue
        vals = measure_own[members]
        finite = vals[np.isfinite(vals)]
        if not np.isfinite(k_sigma) or finite.size == 0:
            continue
        base = float(np.mean(finite)) if anchor == ANCHOR_MEAN else 0.0
        thresholds[j] = base + k_sigma * float(np.std(finite))
        flags[members] = vals > thresholds[j]
    return flags, thresholds


def cross_class_profile(p: ProximityMatrix, labels: np.ndarray, i: int,
                        deviation: str = MAD) -> np.ndarray:
    """Vector of record i's outlier measure against every class."""
    n_classes = int(labels.max()) + 1
    profile = np.empty(n_classes)
    for j in range(n_classes):
        profile[j] = outlier_measure(p, labels, j, deviation=deviation)[i]
    return profile


def quartile_assignment(measure_own: np.ndarray, labels: np.ndarray,
                        n_classes: int):
    """Within-class quartiles 1..4 of the own-class measure, ascending.

    The highest measures land in quartile 4.  Ties break by record id.
    Classes with fewer than 4 records collapse to quartile 1 and are
    reported in the returned per-class boolean vector.
    """
    n = measure_own.shape[0]
    quartiles = np.ones(n, dtype=np.int64)
    small = np.zeros(n_classes, dtype=bool)
    for j in range(n_classes):
        members = _class_members(labels, j)
        m = members.size
        if m == 0:
            continue
        if m < 4:
            small[j] = True
            continue
        order = members[np.argsort(measure_own[members], kind="stable")]
        ranks = np.arange(m)
        quartiles[order] = 1 + (4 * ranks) // m
    return quartiles, small


def score_dataset(p: ProximityMatrix, labels: np.ndarray,
                  class_names: tuple[str, ...], k_sigma: float = 2.0,
                  deviation: str = MAD,
                  anchor: str = ANCHOR_MEAN) -> OutlierScores:
    """Full scoring pass: measures for every (record, class), flags,
    novelty detection, and within-class quartiles."""
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    n_classes = len(class_names)
    counts = np.bincount(labels, minlength=n_classes)
    for j in range(n_classes):
        if counts[j] < 2:
            raise EmptyClass(
                f"class {class_names[j]!r} has {counts[j]} record(s); "
                "need at least 2 for scoring"
            )
    avg = average_proximity_matrix(p, labels, n_classes)
    raw = np.empty((n, n_classes))
    measure = np.empty((n, n_classes))
    med = np.empty(n_classes)
    dev = np.empty(n_classes)
    for j in range(n_classes):
        raw[:, j] = _raw_from_avg(avg[:, j], int(counts[j]))
        measure[:, j], med[j], dev[j] = standardize_raw(
            raw[:, j], labels == j, deviation)
    measure_own = measure[np.arange(n), labels]
    flags, thresholds = _flag_outliers(
        measure_own, labels, n_classes, k_sigma=k_sigma, anchor=anchor)
    novelty = np.all(measure > thresholds[None, :], axis=1)
    quartiles, small = quartile_assignment(measure_own, labels, n_classes)
    return OutlierScores(
        labels=labels,
        class_names=tuple(class_names),
        avg_prox=avg,
        raw=raw,
        measure=measure,
        med=med,
        dev=dev,
        thresholds=thresholds,
        flags=flags,
        novelty=novelty,
        quartiles=quartiles,
        small_quartile_classes=small,
        k_sigma=float(k_sigma),
        deviation=deviation,
        anchor=anchor,
    )
