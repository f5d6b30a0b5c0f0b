"""Classification and ranking metrics plus the paired signed-rank test
used for model comparisons."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ValidationError

SIGNIFICANCE_LEVELS = (0.005, 0.001)


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int
    auroc: Optional[float] = None
    auprc: Optional[float] = None
    seed: Optional[int] = None
    precision_defined: bool = True
    recall_defined: bool = True

    def to_dict(self):
        return {
            "accuracy": self.accuracy, "precision": self.precision,
            "recall": self.recall, "f1": self.f1,
            "auroc": self.auroc, "auprc": self.auprc,
            "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
            "seed": self.seed,
            "precision_defined": self.precision_defined,
            "recall_defined": self.recall_defined,
        }


def _validate_labels(values, name):
    arr = np.asarray(values)
    if arr.size == 0:
        raise ValidationError(f"{name} must be non-empty")
    if not np.isin(arr, (0, 1)).all():
        raise ValidationError(f"{name} must contain only 0/1 labels")
    return arr.astype(np.int64)


def classification_metrics(predicted, true) -> MetricsReport:
    """Confusion-matrix metrics with the positive class being label 1.

    Precision and recall fall back to 0 (and are flagged) when their
    denominator is zero.
    """
    predicted = _validate_labels(predicted, "predicted labels")
    true = _validate_labels(true, "true labels")
    if predicted.shape != true.shape:
        raise ValidationError(
            f"predicted {predicted.shape} and true {true.shape} differ in length")
    tp = int(np.sum((predicted == 1) & (true == 1)))
    fp = int(np.sum((predicted == 1) & (true == 0)))
    tn = int(np.sum((predicted == 0) & (true == 0)))
    fn = int(np.sum((predicted == 0) & (true == 1)))
    total = tp + fp + tn + fn
    accuracy = (tp + tn) / total
    precision_defined = (tp + fp) > 0
    recall_defined = (tp + fn) > 0
    precision = tp / (tp + fp) if precision_defined else 0.0
    recall = tp / (tp + fn) if recall_defined else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall > 0 else 0.0)
    return MetricsReport(accuracy=accuracy, precision=precision, recall=recall,
                         f1=f1, tp=tp, fp=fp, tn=tn, fn=fn,
                         precision_defined=precision_defined,
                         recall_defined=recall_defined)


def _split_scores(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = _validate_labels(labels, "labels")
    if scores.shape != labels.shape:
        raise ValidationError(
            f"scores {scores.shape} and labels {labels.shape} differ in length")
    return scores, labels


def auroc_pairwise(scores, labels) -> float:
    """P(score_pos > score_neg) + 0.5 P(tie), by enumerating all pairs."""
    scores, labels = _split_scores(scores, labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if pos.size == 0 or neg.size == 0:
        raise ValidationError("auroc needs both classes present")
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (pos.size * neg.size)


def _average_ranks(values) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def auroc_ranksum(scores, labels) -> float:
    """Mann-Whitney U through average ranks; equal to the pairwise path."""
    scores, labels = _split_scores(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("auroc needs both classes present")
    ranks = _average_ranks(scores)
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def auroc(scores, labels) -> float:
    scores, labels = _split_scores(scores, labels)
    if scores.size <= 10_000:
        return auroc_pairwise(scores, labels)
    return auroc_ranksum(scores, labels)


def auprc(scores, labels) -> float:
    """Average precision: step-wise sum over distinct thresholds in
    descending score order, tied scores handled as one group."""
    scores, labels = _split_scores(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValidationError("auprc needs at least one positive example")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    area = 0.0
    tp = fp = 0
    prev_recall = 0.0
    i = 0
    n = len(scores)
    while i < n:
        j = i
        while j + 1 < n and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        tp += int(sorted_labels[i:j + 1].sum())
        fp += (j - i + 1) - int(sorted_labels[i:j + 1].sum())
        recall = tp / n_pos
        precision = tp / (tp + fp)
        area += (recall - prev_recall) * precision
        prev_recall = recall
        i = j + 1
    return area


@dataclass
class ComparisonResult:
    z_value: float
    p_value: float
    significant_at: Optional[float]
    n_pairs: int
    method: str
    w_plus: float
    w_minus: float

    def to_dict(self):
        return {
            "z": self.z_value, "p": self.p_value,
            "sig": self.significant_at, "n_pairs": self.n_pairs,
            "method": self.method,
        }


def significance_level(p: float) -> Optional[float]:
    """Strictest of the reported thresholds that p clears, if any."""
    for level in sorted(SIGNIFICANCE_LEVELS):
        if p < level:
            return level
    return None


def _exact_signed_rank_p(ranks: np.ndarray, w: float) -> float:
    """Two-sided p = 2 P(T+ <= w) under random signs, by counting the full
    T+ distribution. Ranks are doubled so tie-averaged ranks stay integral."""
    doubled = np.rint(ranks * 2.0).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:counts.size - r]
        counts += shifted
    threshold = int(math.floor(2.0 * w + 1e-9))
    below = counts[:min(threshold, total) + 1].sum()
    p = 2.0 * below / (2.0 ** len(ranks))
    return min(1.0, p)


def wilcoxon_signed_rank(scores_a, scores_b) -> ComparisonResult:
    """Two-sided paired signed-rank test, zero differences dropped,
    average ranks for ties, W = min(W+, W-).

    Exact enumeration of the sign distribution when n <= 12, otherwise the
    normal approximation with tie correction. The z value's sign follows
    sign(W+ - W-), so swapping the operands flips it.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError(
            f"paired score lists must match in length, got {a.shape} and {b.shape}")
    diffs = a - b
    diffs = diffs[diffs != 0.0]
    n = diffs.size
    if n == 0:
        raise ValidationError(
            "degenerate comparison: all per-seed differences are zero")
    if n < 5:
        raise ValidationError(
            f"need at least 5 non-zero differences, got {n}")
    ranks = _average_ranks(np.abs(diffs))
    w_plus = float(ranks[diffs > 0].sum())
    w_minus = float(ranks[diffs < 0].sum())
    w = min(w_plus, w_minus)

    mean = n * (n + 1) / 4.0
    variance = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(np.abs(diffs), return_counts=True)
    variance -= float(np.sum(tie_counts ** 3 - tie_counts)) / 48.0
    if variance <= 0.0:
        raise ValidationError(
            "degenerate comparison: zero variance after tie correction")
    magnitude = (mean - w) / math.sqrt(variance)
    direction = np.sign(w_plus - w_minus)
    z = float(direction * magnitude)

    if n <= 12:
        p = _exact_signed_rank_p(ranks, w)
        method = "exact"
    else:
        p = math.erfc(magnitude / math.sqrt(2.0))
        method = "normal_approximation"
    return ComparisonResult(z_value=z, p_value=p,
                            significant_at=significance_level(p),
                            n_pairs=n, method=method,
                            w_plus=w_plus, w_minus=w_minus)


def normal_approximation_p(scores_a, scores_b) -> float:
    """The normal-path p regardless of n; used to cross-check the exact path."""
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    diffs = (a - b)[(a - b) != 0.0]
    n = diffs.size
    ranks = _average_ranks(np.abs(diffs))
    w = min(float(ranks[diffs > 0].sum()), float(ranks[diffs < 0].sum()))
    mean = n * (n + 1) / 4.0
    variance = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(np.abs(diffs), return_counts=True)
    variance -= float(np.sum(tie_counts ** 3 - tie_counts)) / 48.0
    if variance <= 0.0:
        raise ValidationError("zero variance after tie correction")
    return math.erfc((mean - w) / math.sqrt(variance) / math.sqrt(2.0))


@dataclass
class SeedAggregate:
    reports: list
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)

    METRIC_FIELDS = ("accuracy", "precision", "recall", "f1", "auroc", "auprc")

    @classmethod
    def from_reports(cls, reports) -> "SeedAggregate":
        if len(reports) < 2:
            raise ValidationError(
                f"aggregation needs at least 2 per-seed reports, got {len(reports)}")
        agg = cls(reports=list(reports))
        for name in cls.METRIC_FIELDS:
            values = [getattr(r, name) for r in reports]
            if any(v is None for v in values):
                continue
            arr = np.asarray(values, dtype=np.float64)
            agg.mean[name] = float(arr.mean())
            agg.std[name] = float(arr.std(ddof=1))
        return agg

    def metric_values(self, name):
        return [getattr(r, name) for r in self.reports]
