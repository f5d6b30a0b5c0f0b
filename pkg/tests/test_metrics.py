import math

import numpy as np
import numpy.testing as npt
import pytest
import scipy.stats

from riskseq import metrics
from riskseq.errors import ValidationError


class TestClassificationMetrics:
    def test_perfect_predictions(self):
        report = metrics.classification_metrics([1, 0, 1, 0], [1, 0, 1, 0])
        assert report.accuracy == 1.0
        assert report.precision == 1.0
        assert report.recall == 1.0
        assert report.f1 == 1.0
        assert (report.tp, report.fp, report.tn, report.fn) == (2, 0, 2, 0)

    def test_hand_computed_confusion(self):
        report = metrics.classification_metrics(
            [1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
        assert (report.tp, report.fp, report.tn, report.fn) == (2, 1, 1, 1)
        assert report.accuracy == pytest.approx(3 / 5)
        assert report.precision == pytest.approx(2 / 3)
        assert report.recall == pytest.approx(2 / 3)
        assert report.f1 == pytest.approx(2 / 3)

    def test_no_positive_predictions_flags_precision(self):
        report = metrics.classification_metrics([0, 0, 0], [1, 0, 1])
        assert report.precision == 0.0
        assert not report.precision_defined
        assert report.recall == 0.0
        assert report.recall_defined
        assert report.f1 == 0.0

    def test_no_positive_labels_flags_recall(self):
        report = metrics.classification_metrics([0, 1, 0], [0, 0, 0])
        assert report.recall == 0.0
        assert not report.recall_defined
        assert report.precision_defined

    def test_permutation_invariance(self):
        rng = np.random.RandomState(7)
        predicted = rng.randint(0, 2, size=50)
        true = rng.randint(0, 2, size=50)
        base = metrics.classification_metrics(predicted, true)
        for trial in range(10):
            perm = rng.permutation(50)
            shuffled = metrics.classification_metrics(predicted[perm], true[perm])
            assert shuffled == base

    def test_empty_input_rejected(self):
        with pytest.raises(ValidationError, match="non-empty"):
            metrics.classification_metrics([], [])

    def test_non_binary_labels_rejected(self):
        with pytest.raises(ValidationError, match="0/1"):
            metrics.classification_metrics([0, 2], [0, 1])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidationError, match="length"):
            metrics.classification_metrics([0, 1], [0, 1, 1])


class TestAuroc:
    def test_perfect_ranking(self):
        assert metrics.auroc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_reversed_ranking(self):
        assert metrics.auroc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0

    def test_hand_computed_case(self):
        # pos scores 0.35, 0.8 vs neg 0.1, 0.4: three of four pairs ordered
        value = metrics.auroc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
        assert value == pytest.approx(0.75)

    def test_all_tied_scores(self):
        assert metrics.auroc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5

    def test_paths_agree_with_ties(self):
        rng = np.random.RandomState(11)
        for trial in range(100):
            n = rng.randint(10, 500)
            scores = np.round(rng.rand(n), 2)
            labels = rng.randint(0, 2, size=n)
            if labels.sum() in (0, n):
                labels[0] = 1 - labels[0]
            a = metrics.auroc_pairwise(scores, labels)
            b = metrics.auroc_ranksum(scores, labels)
            assert abs(a - b) < 1e-12

    def test_matches_mann_whitney_u(self):
        rng = np.random.RandomState(3)
        for trial in range(20):
            n = rng.randint(10, 200)
            scores = np.round(rng.randn(n), 1)
            labels = rng.randint(0, 2, size=n)
            if labels.sum() in (0, n):
                labels[0] = 1 - labels[0]
            pos = scores[labels == 1]
            neg = scores[labels == 0]
            u = scipy.stats.mannwhitneyu(pos, neg, alternative="two-sided").statistic
            expected = u / (pos.size * neg.size)
            assert metrics.auroc(scores, labels) == pytest.approx(expected, abs=1e-12)

    def test_monotone_transform_invariance(self):
        rng = np.random.RandomState(5)
        scores = rng.randn(80)
        labels = rng.randint(0, 2, size=80)
        labels[0] = 1
        labels[1] = 0
        base = metrics.auroc(scores, labels)
        assert metrics.auroc(3.0 * scores + 2.0, labels) == base
        assert metrics.auroc(np.tanh(scores), labels) == base

    def test_single_class_rejected(self):
        with pytest.raises(ValidationError, match="both classes"):
            metrics.auroc([0.1, 0.2], [1, 1])
        with pytest.raises(ValidationError, match="both classes"):
            metrics.auroc([0.1, 0.2], [0, 0])


class TestAuprc:
    def test_perfect_ranking(self):
        assert metrics.auprc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0

    def test_single_positive_ranked_first(self):
        assert metrics.auprc([0.9, 0.5, 0.1], [1, 0, 0]) == 1.0

    def test_hand_computed_case(self):
        # recall steps at precisions 1 and 2/3
        value = metrics.auprc([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0])
        assert value == pytest.approx(0.5 + 1.0 / 3.0)

    def test_tied_scores_grouped(self):
        # one threshold group covering both rows
        assert metrics.auprc([0.5, 0.5], [1, 0]) == pytest.approx(0.5)
        # grouping makes the value independent of within-tie order
        assert metrics.auprc([0.5, 0.5], [0, 1]) == pytest.approx(0.5)

    def test_random_scores_approach_prevalence(self):
        rng = np.random.RandomState(13)
        n = 10_000
        prevalence = 0.3
        labels = (rng.rand(n) < prevalence).astype(int)
        scores = rng.rand(n)
        value = metrics.auprc(scores, labels)
        assert abs(value - labels.mean()) < 0.05

    def test_no_positives_rejected(self):
        with pytest.raises(ValidationError, match="positive"):
            metrics.auprc([0.4, 0.6], [0, 0])

    def test_monotone_transform_invariance(self):
        rng = np.random.RandomState(17)
        scores = rng.randn(60)
        labels = rng.randint(0, 2, size=60)
        labels[0] = 1
        base = metrics.auprc(scores, labels)
        assert metrics.auprc(5.0 * scores - 1.0, labels) == base


class TestWilcoxonSignedRank:
    def test_ten_positive_differences(self):
        b = np.arange(10, dtype=float)
        a = b + np.arange(1.0, 11.0)
        result = metrics.wilcoxon_signed_rank(a, b)
        assert result.n_pairs == 10
        assert result.method == "exact"
        assert result.w_plus == 55.0
        assert result.w_minus == 0.0
        assert result.p_value == pytest.approx(2.0 / 1024.0, rel=1e-12)
        assert result.z_value == pytest.approx(27.5 / math.sqrt(96.25), rel=1e-12)
        assert result.significant_at == 0.005

    def test_antisymmetry(self):
        rng = np.random.RandomState(23)
        a = rng.randn(9)
        b = a + rng.randn(9)
        forward = metrics.wilcoxon_signed_rank(a, b)
        backward = metrics.wilcoxon_signed_rank(b, a)
        assert forward.z_value == pytest.approx(-backward.z_value, rel=1e-12)
        assert forward.p_value == pytest.approx(backward.p_value, rel=1e-12)

    def test_identical_lists_degenerate(self):
        a = np.arange(8.0)
        with pytest.raises(ValidationError, match="degenerate"):
            metrics.wilcoxon_signed_rank(a, a.copy())

    def test_too_few_nonzero_differences(self):
        a = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        b = np.array([1.0, 2.0, 2.5, 3.5, 4.5, 5.5])
        with pytest.raises(ValidationError, match="at least 5"):
            metrics.wilcoxon_signed_rank(a, b)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidationError, match="length"):
            metrics.wilcoxon_signed_rank([1.0] * 6, [0.0] * 5)

    def test_exact_p_matches_scipy(self):
        rng = np.random.RandomState(31)
        checked = 0
        while checked < 200:
            n = rng.randint(5, 13)
            diffs = rng.randn(n)
            if np.unique(np.abs(diffs)).size < n:
                continue
            a = rng.randn(n)
            b = a - diffs
            result = metrics.wilcoxon_signed_rank(a, b)
            oracle = scipy.stats.wilcoxon(
                a, b, zero_method="wilcox", correction=False,
                alternative="two-sided", method="exact")
            assert result.method == "exact"
            assert result.p_value == pytest.approx(oracle.pvalue, rel=1e-12)
            checked += 1

    def test_normal_p_matches_scipy_with_ties(self):
        rng = np.random.RandomState(37)
        checked = 0
        while checked < 100:
            n = rng.randint(13, 60)
            diffs = np.round(rng.randn(n), 1)
            if np.any(diffs == 0.0):
                continue
            a = rng.randn(n)
            b = a - diffs
            result = metrics.wilcoxon_signed_rank(a, b)
            oracle = scipy.stats.wilcoxon(
                a, b, zero_method="wilcox", correction=False,
                alternative="two-sided", method="approx")
            assert result.method == "normal_approximation"
            assert result.p_value == pytest.approx(oracle.pvalue, rel=1e-9)
            checked += 1

    def test_zero_differences_dropped(self):
        a = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0])
        b = a.copy()
        b[:6] -= np.array([0.5, 1.5, 2.5, 0.25, 0.75, 1.25])
        result = metrics.wilcoxon_signed_rank(a, b)
        assert result.n_pairs == 6

    def test_exact_and_normal_significance_mostly_agree(self):
        rng = np.random.RandomState(41)
        agree = 0
        total = 300
        for trial in range(total):
            n = rng.randint(6, 13)
            shift = rng.choice([0.0, 0.5, 1.5])
            a = rng.randn(n) + shift
            b = rng.randn(n)
            diffs = a - b
            if np.count_nonzero(diffs) < 5:
                total -= 1
                continue
            exact = metrics.wilcoxon_signed_rank(a, b).p_value
            normal = metrics.normal_approximation_p(a, b)
            if (exact < 0.005) == (normal < 0.005):
                agree += 1
        assert agree / total >= 0.95


class TestSignificanceLevel:
    def test_thresholds(self):
        assert metrics.significance_level(0.0005) == 0.001
        assert metrics.significance_level(0.003) == 0.005
        assert metrics.significance_level(0.01) is None
        assert metrics.significance_level(0.005) is None
        assert metrics.significance_level(0.001) == 0.005


class TestSeedAggregate:
    @staticmethod
    def report(seed, f1):
        return metrics.MetricsReport(
            accuracy=0.9, precision=0.8, recall=0.7, f1=f1,
            tp=1, fp=1, tn=1, fn=1, auroc=0.95, auprc=0.85, seed=seed)

    def test_mean_and_sample_std(self):
        reports = [self.report(0, 0.6), self.report(1, 0.8), self.report(2, 1.0)]
        agg = metrics.SeedAggregate.from_reports(reports)
        assert agg.mean["f1"] == pytest.approx(0.8)
        assert agg.std["f1"] == pytest.approx(0.2)
        assert agg.mean["auroc"] == pytest.approx(0.95)
        assert agg.std["auroc"] == pytest.approx(0.0)

    def test_requires_two_reports(self):
        with pytest.raises(ValidationError, match="at least 2"):
            metrics.SeedAggregate.from_reports([self.report(0, 0.5)])

    def test_metric_values_ordering(self):
        reports = [self.report(3, 0.1), self.report(1, 0.2)]
        agg = metrics.SeedAggregate.from_reports(reports)
        npt.assert_array_equal(agg.metric_values("f1"), [0.1, 0.2])
