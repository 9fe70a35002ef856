import statistics

import numpy as np
import pytest

from proxout import (ForestParams, class_average_proximity,
                     cross_class_profile, fit_forest, outlier_measure,
                     proximity_matrix, quartile_assignment, raw_outlier,
                     score_dataset, within_class_outliers)
from proxout.outlier import (EmptyClass, SingletonOwnClass, _flag_outliers,
                             standardize_raw)
from proxout.proximity import ProximityMatrix

from conftest import random_dataset


def prox(values):
    return ProximityMatrix(values=np.asarray(values, dtype=np.float64),
                           kind="original")


# 5-record hand fixture: class a = {0,1,2}, class b = {3,4}
FIXTURE = prox([
    [1.0, 0.9, 0.8, 0.1, 0.2],
    [0.9, 1.0, 0.6, 0.3, 0.1],
    [0.8, 0.6, 1.0, 0.2, 0.4],
    [0.1, 0.3, 0.2, 1.0, 0.7],
    [0.2, 0.1, 0.4, 0.7, 1.0],
])
FIXTURE_LABELS = np.array([0, 0, 0, 1, 1])


def scalar_chain(p, labels, i, j):
    """Independent scalar evaluation of the measure chain for one record."""
    members = [m for m in range(len(labels)) if labels[m] == j]
    mass = sum(p.values[i, m] ** 2 for m in members if m != i)
    n_j = len(members)
    raw_i = n_j / mass
    pool = []
    for m in members:
        if m == i:
            pool.append(raw_i)
            continue
        mass_m = sum(p.values[m, o] ** 2 for o in members if o != m)
        pool.append(n_j / mass_m)
    if labels[i] != j:
        pool.append(raw_i)
    med = statistics.median(pool)
    deviations = sorted(abs(v - med) for v in pool)
    dev = statistics.median(deviations)
    if dev < 1e-12:  # degenerate robust spread: mean-deviation fallback
        dev = statistics.mean(deviations)
    if dev < 1e-12:
        if abs(raw_i - med) < 1e-12:
            return 0.0
        return float("inf") if raw_i > med else float("-inf")
    return (raw_i - med) / dev


class TestClassAverageProximity:
    def test_unit_proximities(self):
        p = prox(np.ones((3, 3)))
        labels = np.array([0, 0, 0])
        assert class_average_proximity(p, labels, 0, 0) == pytest.approx(2.0)

    def test_zero_mass(self):
        v = np.eye(4)
        p = prox(v)
        labels = np.array([0, 1, 1, 1])
        assert class_average_proximity(p, labels, 0, 1) == 0.0

    def test_squared_sum(self):
        v = np.eye(4)
        v[0, 1:] = [0.5, 0.25, 1.0]
        v[1:, 0] = [0.5, 0.25, 1.0]
        p = prox(v)
        labels = np.array([1, 0, 0, 0])
        assert class_average_proximity(p, labels, 0, 0) == pytest.approx(1.3125)

    def test_errors(self):
        p = prox(np.eye(3))
        with pytest.raises(EmptyClass):
            class_average_proximity(p, np.array([0, 0, 0]), 0, 1)
        with pytest.raises(SingletonOwnClass):
            class_average_proximity(p, np.array([0, 1, 1]), 0, 0)


class TestRawOutlier:
    def test_simple_value(self):
        # 3-member class with mass 2 for record 0
        v = np.ones((3, 3))
        v[0, 1] = v[1, 0] = 1.0
        v[0, 2] = v[2, 0] = 1.0
        p = prox(v)
        labels = np.array([0, 0, 0])
        raws = raw_outlier(p, labels, 0)
        assert raws[0] == pytest.approx(3 / 2)

    def test_zero_mass_infinite(self):
        p = prox(np.eye(3))
        labels = np.array([1, 0, 0])
        raws = raw_outlier(p, labels, 0)
        assert np.isinf(raws[0])

    def test_identical_members_closed_form(self):
        for m in (2, 3, 5, 8):
            p = prox(np.ones((m, m)))
            labels = np.zeros(m, dtype=np.int64)
            raws = raw_outlier(p, labels, 0)
            assert np.allclose(raws, m / (m - 1))


class TestOutlierMeasure:
    def test_identical_records_all_zero(self):
        p = prox(np.ones((4, 4)))
        labels = np.zeros(4, dtype=np.int64)
        assert np.array_equal(outlier_measure(p, labels, 0), np.zeros(4))

    def test_record_at_median_scores_zero(self):
        out = outlier_measure(FIXTURE, FIXTURE_LABELS, 0)
        raws = raw_outlier(FIXTURE, FIXTURE_LABELS, 0)
        med_holder = int(np.argsort(raws[:3])[1])
        assert out[med_holder] == 0.0

    def test_five_record_fixture_matches_scalar_chain(self):
        for j in (0, 1):
            out = outlier_measure(FIXTURE, FIXTURE_LABELS, j)
            for i in range(5):
                if FIXTURE_LABELS[i] == j and j == 1:
                    # 2-member class: both raws equal the median, dev is 0
                    assert out[i] == 0.0
                    continue
                expected = scalar_chain(FIXTURE, FIXTURE_LABELS, i, j)
                assert out[i] == pytest.approx(expected, rel=1e-12)

    def test_empty_class(self):
        with pytest.raises(EmptyClass):
            outlier_measure(FIXTURE, FIXTURE_LABELS, 2)


class TestStandardizeInvariances:
    def test_scale_free(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            m = int(rng.integers(4, 20))
            raws = rng.uniform(0.5, 5.0, size=m)
            own = np.zeros(m, dtype=bool)
            own[: m // 2 + 2] = True
            base, _, _ = standardize_raw(raws, own)
            for c in (0.3, 2.0, 117.0):
                scaled, _, _ = standardize_raw(raws * c, own)
                assert np.allclose(scaled, base, atol=1e-9)

    def test_translation_invariant(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            m = int(rng.integers(4, 20))
            raws = rng.uniform(0.5, 5.0, size=m)
            own = np.zeros(m, dtype=bool)
            own[: m // 2 + 2] = True
            base, _, _ = standardize_raw(raws, own)
            shifted, _, _ = standardize_raw(raws + 3.7, own)
            assert np.allclose(shifted, base, atol=1e-9)

    def test_monotone_within_class(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            m = int(rng.integers(4, 25))
            raws = rng.uniform(0.1, 10.0, size=m)
            own = np.ones(m, dtype=bool)
            out, _, _ = standardize_raw(raws, own)
            order = np.argsort(raws)
            assert np.all(np.diff(out[order]) >= -1e-12)

    def test_exclusion_rule_consistency(self):
        # scoring member i of class J through the standard path equals the
        # foreign-path evaluation on the class without i, with i's raw
        # re-added through the inclusion clause (same pool, same result)
        out = outlier_measure(FIXTURE, FIXTURE_LABELS, 0)
        raws = raw_outlier(FIXTURE, FIXTURE_LABELS, 0)
        for i in (0, 1, 2):
            pool = [raws[m] for m in (0, 1, 2) if m != i] + [raws[i]]
            med = statistics.median(pool)
            dev = statistics.median(sorted(abs(v - med) for v in pool))
            assert out[i] == pytest.approx((raws[i] - med) / dev, rel=1e-12)

    def test_median_of_inclass_measures_is_zero(self):
        rng = np.random.default_rng(3)
        for trial in range(100):
            d = random_dataset(rng, n=30, p=3, k=2)
            f = fit_forest(d, ForestParams(n_trees=10, seed=trial))
            p = proximity_matrix(f, d)
            scores = score_dataset(p, d.y, d.class_names)
            own = scores.measure_own()
            for j in range(d.n_classes):
                vals = own[d.y == j]
                if scores.dev[j] > 1e-12 and np.all(np.isfinite(vals)):
                    assert abs(np.median(vals)) <= 1e-9


class TestFlags:
    def test_uniform_scores_no_flags(self):
        flags, _ = _flag_outliers(np.zeros(20), np.zeros(20, dtype=np.int64), 1)
        assert not flags.any()

    def test_single_extreme_record_flagged(self):
        own = np.concatenate((np.random.default_rng(0).normal(0, 0.1, 49),
                              [10.0]))
        flags, _ = _flag_outliers(own, np.zeros(50, dtype=np.int64), 1,
                                  k_sigma=2.0)
        assert flags[49]
        assert flags.sum() <= 3

    def test_infinite_k_sigma_no_flags(self):
        own = np.array([0.0, 1.0, 50.0, np.inf])
        flags, _ = _flag_outliers(own, np.zeros(4, dtype=np.int64), 1,
                                  k_sigma=np.inf)
        assert not flags.any()

    def test_infinite_measure_flagged(self):
        own = np.array([0.0, 0.5, -0.5, 0.2, np.inf])
        flags, _ = _flag_outliers(own, np.zeros(5, dtype=np.int64), 1,
                                  k_sigma=2.0)
        assert flags[4]

    def test_public_reflag(self):
        p = FIXTURE
        scores = score_dataset(p, FIXTURE_LABELS, ("a", "b"))
        assert not within_class_outliers(scores, k_sigma=np.inf).any()

    def test_zero_anchor(self):
        own = np.array([5.0, 5.1, 4.9, 5.05])
        flags_mean, _ = _flag_outliers(own, np.zeros(4, dtype=np.int64), 1,
                                       k_sigma=2.0, anchor="mean")
        flags_zero, _ = _flag_outliers(own, np.zeros(4, dtype=np.int64), 1,
                                       k_sigma=2.0, anchor="zero")
        assert not flags_mean.any()
        assert flags_zero.all()  # everything sits far above 0 + 2*std


class TestCrossClassProfile:
    def test_identical_to_class_not_novel(self):
        # record 3 has unit proximity to every member of class a
        v = np.ones((5, 5)) * 0.1
        np.fill_diagonal(v, 1.0)
        for a in (0, 1, 2):
            v[3, a] = v[a, 3] = 1.0
            for b in (0, 1, 2):
                if a != b:
                    v[a, b] = v[b, a] = 1.0
        labels = np.array([0, 0, 0, 1, 1])
        profile = cross_class_profile(prox(v), labels, 3)
        in_class = outlier_measure(prox(v), labels, 0)
        assert profile[0] <= np.max(in_class[:3]) + 1e-12

    def test_isolated_record_infinite_everywhere(self):
        v = np.eye(6)
        v[np.ix_([1, 2], [1, 2])] = 1.0
        v[np.ix_([3, 4, 5], [3, 4, 5])] = 1.0
        labels = np.array([0, 0, 0, 1, 1, 1])
        profile = cross_class_profile(prox(v), labels, 0)
        assert np.all(np.isinf(profile))

    def test_matches_score_dataset_row(self):
        scores = score_dataset(FIXTURE, FIXTURE_LABELS, ("a", "b"))
        profile = cross_class_profile(FIXTURE, FIXTURE_LABELS, 3)
        assert np.allclose(profile, scores.measure[3], equal_nan=True)


class TestQuartiles:
    def test_eight_distinct(self):
        own = np.arange(8.0)
        q, small = quartile_assignment(own, np.zeros(8, dtype=np.int64), 1)
        assert np.array_equal(q, [1, 1, 2, 2, 3, 3, 4, 4])
        assert not small[0]

    def test_four_ties_deterministic(self):
        own = np.zeros(4)
        q, _ = quartile_assignment(own, np.zeros(4, dtype=np.int64), 1)
        assert np.array_equal(q, [1, 2, 3, 4])

    def test_small_class_collapses(self):
        own = np.array([3.0, 1.0, 2.0])
        q, small = quartile_assignment(own, np.zeros(3, dtype=np.int64), 1)
        assert np.array_equal(q, [1, 1, 1])
        assert small[0]

    def test_sizes_within_one(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            m = int(rng.integers(4, 40))
            own = rng.normal(size=m)
            q, _ = quartile_assignment(own, np.zeros(m, dtype=np.int64), 1)
            sizes = np.bincount(q, minlength=5)[1:]
            assert sizes.max() - sizes.min() <= 1

    def test_infinite_scores_rank_top(self):
        own = np.array([0.0, np.inf, 1.0, -1.0, 0.5, 2.0, 0.1, 0.7])
        q, _ = quartile_assignment(own, np.zeros(8, dtype=np.int64), 1)
        assert q[1] == 4


class TestScoreDataset:
    def test_fixture_consistency(self):
        scores = score_dataset(FIXTURE, FIXTURE_LABELS, ("a", "b"))
        assert scores.measure.shape == (5, 2)
        assert np.array_equal(scores.raw[:, 0],
                              raw_outlier(FIXTURE, FIXTURE_LABELS, 0))
        assert scores.small_quartile_classes.all()  # both classes < 4 records

    def test_rejects_singleton_class(self):
        with pytest.raises(EmptyClass):
            score_dataset(FIXTURE, np.array([0, 0, 0, 0, 1]), ("a", "b"))
