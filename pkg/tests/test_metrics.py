import numpy as np
import pytest
from hypothesis import given, strategies as st

from ceco.etf import make_etf
from ceco.exceptions import (
    ExcludedClassError,
    InsufficientClassesError,
    NormalizationError,
    UndefinedCorrelationError,
)
from ceco.metrics import (
    FeatureBatch,
    centered_normalized_means,
    class_stats,
    equiangularity_std,
    head_common_tail_split,
    imbalance_factor,
    max_angle_deviation,
    nc_report,
    pearson,
    self_duality_gap,
)


class TestClassStats:
    def test_basic_means(self):
        batch = FeatureBatch(features=[[1, 1], [3, 3], [0, 2]], labels=[1, 1, 2], K=3)
        stats = class_stats(batch)
        assert np.allclose(stats.class_means[0], [2, 2])
        assert np.allclose(stats.class_means[1], [0, 2])
        assert not stats.present[2]
        assert np.allclose(stats.global_mean, [4 / 3, 2])
        assert stats.counts.tolist() == [2, 1, 0]

    def test_single_class_mean_is_global(self):
        batch = FeatureBatch(features=np.arange(8.0).reshape(4, 2), labels=[2, 2, 2, 2], K=3)
        stats = class_stats(batch)
        assert np.array_equal(stats.class_means[1], stats.global_mean)

    def test_single_row(self):
        batch = FeatureBatch(features=[[5.0, 6.0]], labels=[2], K=2)
        stats = class_stats(batch)
        assert np.array_equal(stats.class_means[1], [5.0, 6.0])
        assert stats.counts.tolist() == [0, 1]

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            FeatureBatch(features=[[1.0]], labels=[3], K=2)


class TestCenteredNormalizedMeans:
    def test_two_symmetric_classes(self):
        batch = FeatureBatch(features=[[1, 0], [-1, 0]], labels=[1, 2], K=2)
        Zhat, labels, excluded = centered_normalized_means(class_stats(batch))
        assert labels == [1, 2] and excluded == []
        assert np.allclose(Zhat, [[1, 0], [-1, 0]])

    def test_balanced_two_classes_antipodal(self):
        rng = np.random.default_rng(0)
        f = rng.standard_normal((6, 3))
        batch = FeatureBatch(features=f, labels=[1, 1, 1, 2, 2, 2], K=2)
        Zhat, _, _ = centered_normalized_means(class_stats(batch))
        assert np.allclose(Zhat[0], -Zhat[1])

    def test_class_at_global_mean_excluded(self):
        # class 3 mean coincides with the global mean of all rows
        feats = [[1, 0], [-1, 0], [0, 0]]
        batch = FeatureBatch(features=feats, labels=[1, 2, 3], K=3)
        Zhat, labels, excluded = centered_normalized_means(class_stats(batch))
        assert excluded == [3]
        assert labels == [1, 2]

    def test_insufficient_classes(self):
        batch = FeatureBatch(features=[[1.0, 2.0]], labels=[1], K=2)
        with pytest.raises(InsufficientClassesError):
            centered_normalized_means(class_stats(batch))


class TestEquiangularityStd:
    def test_etf_rows_zero(self):
        V = make_etf(8, 5, 1.0, 3).matrix.T
        assert equiangularity_std(V) < 1e-10

    def test_orthonormal_rows_zero(self):
        assert equiangularity_std(np.eye(3)) == 0.0

    def test_three_rows_enumerated(self):
        V = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
        # cosines over the 3 unordered pairs: {0, -1, 0}
        assert equiangularity_std(V) == pytest.approx(np.sqrt(2) / 3, abs=1e-12)

    def test_non_unit_rejected(self):
        with pytest.raises(NormalizationError):
            equiangularity_std(np.array([[2.0, 0.0], [0.0, 1.0]]))

    def test_rotation_invariance(self):
        rng = np.random.default_rng(1)
        V = make_etf(6, 4, 1.0, 0).matrix.T
        R, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        assert abs(equiangularity_std(V) - equiangularity_std(V @ R.T)) < 1e-10


class TestMaxAngleDeviation:
    def test_etf_rows_zero(self):
        V = make_etf(7, 6, 1.0, 2).matrix.T
        assert max_angle_deviation(V, 6) < 1e-10

    def test_orthonormal_rows(self):
        assert max_angle_deviation(np.eye(3), 3) == pytest.approx(0.5)

    def test_antipodal_pair(self):
        V = np.array([[1.0, 0.0], [-1.0, 0.0]])
        assert max_angle_deviation(V, 2) == pytest.approx(0.0)

    def test_k_effective_must_match(self):
        with pytest.raises(ValueError):
            max_angle_deviation(np.eye(3), 4)


class TestSelfDualityGap:
    def test_aligned_is_zero(self):
        Zhat = make_etf(5, 4, 1.0, 0).matrix.T
        assert self_duality_gap(Zhat.T, Zhat) == pytest.approx(0.0, abs=1e-12)

    def test_antipodal_is_two(self):
        Zhat = make_etf(5, 4, 1.0, 0).matrix.T
        assert self_duality_gap(-Zhat.T, Zhat) == pytest.approx(2.0, abs=1e-12)

    def test_perturbation_positive(self):
        rng = np.random.default_rng(3)
        Zhat = make_etf(5, 4, 1.0, 0).matrix.T
        W = Zhat.T + 0.1 * rng.standard_normal((5, 4))
        assert self_duality_gap(W, Zhat) > 0


class TestImbalanceFactor:
    def test_examples(self):
        assert imbalance_factor([100, 10, 1]) == 100
        assert imbalance_factor([5, 5, 5]) == 1

    def test_zero_count_rejected(self):
        with pytest.raises(ExcludedClassError):
            imbalance_factor([3, 0, 9])

    @given(st.lists(st.integers(1, 10_000), min_size=2, max_size=20),
           st.integers(1, 50))
    def test_permutation_and_scale_invariance(self, counts, c):
        counts = np.array(counts)
        base = imbalance_factor(counts)
        rng = np.random.default_rng(0)
        assert imbalance_factor(rng.permutation(counts)) == base
        assert imbalance_factor(c * counts) == pytest.approx(base)


class TestPearson:
    def test_exact_linear(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
        assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_constant_rejected(self):
        with pytest.raises(UndefinedCorrelationError):
            pearson([1, 2, 3], [5, 5, 5])

    @given(st.lists(st.floats(-100, 100), min_size=3, max_size=12),
           st.floats(0.1, 10), st.floats(-5, 5))
    def test_affine_invariance(self, a, c, b):
        a = np.asarray(a)
        f = np.linspace(0, 1, a.size) + np.sin(a)
        if np.std(a) < 1e-6 or np.std(f) < 1e-9:
            return
        r = pearson(a, f)
        assert pearson(a, c * f + b) == pytest.approx(r, abs=1e-12)
        assert pearson(a, -c * f + b) == pytest.approx(-r, abs=1e-12)


class TestHeadCommonTailSplit:
    def test_k200_paper_sizes(self):
        counts = np.arange(200, 0, -1)
        head, common, tail = head_common_tail_split(counts)
        assert (len(head), len(common), len(tail)) == (66, 68, 66)

    def test_k9_strictly_decreasing(self):
        head, common, tail = head_common_tail_split([90, 80, 70, 60, 50, 40, 30, 20, 10])
        assert head == [1, 2, 3] and common == [4, 5, 6] and tail == [7, 8, 9]

    def test_k4_sizes(self):
        head, common, tail = head_common_tail_split([4, 3, 2, 1])
        assert (len(head), len(common), len(tail)) == (1, 2, 1)

    def test_partition(self):
        rng = np.random.default_rng(0)
        counts = rng.integers(1, 100, size=17)
        head, common, tail = head_common_tail_split(counts)
        union = sorted(head + common + tail)
        assert union == list(range(1, 18))

    def test_tie_break_by_class_index(self):
        head, common, tail = head_common_tail_split([5, 5, 5])
        assert head == [1] and common == [2] and tail == [3]

    def test_too_few_classes(self):
        with pytest.raises(ValueError):
            head_common_tail_split([2, 1])


class TestNcReport:
    def test_etf_features_report(self):
        frame = make_etf(6, 4, 1.0, 1)
        batch = FeatureBatch(features=frame.matrix.T, labels=[1, 2, 3, 4], K=4)
        report = nc_report(batch, classifier=frame.matrix)
        assert report.n_classes_used == 4
        assert report.equiang_std_centers < 1e-8
        assert report.equiang_std_classifier < 1e-10
        assert report.self_duality_gap < 1e-6

    def test_without_classifier(self):
        batch = FeatureBatch(features=[[1, 0], [-1, 0]], labels=[1, 2], K=2)
        report = nc_report(batch)
        assert report.self_duality_gap is None
        assert report.equiang_std_classifier is None
