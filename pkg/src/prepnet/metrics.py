"""Binary classification metrics: confusion counts, sensitivity,
specificity, balanced accuracy, and rank-based ROC-AUC."""

from dataclasses import dataclass

import numpy as np

from .errors import UndefinedMetricError, ValidationError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0:
                raise ValidationError(f"{name} must be a nonnegative integer, got {v!r}")

    @property
    def positives(self):
        return self.tp + self.fn

    @property
    def negatives(self):
        return self.tn + self.fp


@dataclass(frozen=True)
class MetricsReport:
    """Evaluation result for one (classifier, dataset) pair.

    ba is redundantly stored and checked against (sensitivity +
    specificity) / 2 so a report can never carry an inconsistent triple.
    """

    ba: float
    sensitivity: float
    specificity: float
    auc: float
    counts: ConfusionCounts
    threshold: float = 0.5

    def __post_init__(self):
        for name in ("ba", "sensitivity", "specificity", "auc"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")
        if abs(self.ba - (self.sensitivity + self.specificity) / 2.0) > 1e-12:
            raise ValidationError("ba inconsistent with (sensitivity + specificity) / 2")

    def to_dict(self):
        return {
            "ba": self.ba,
            "sens": self.sensitivity,
            "spec": self.specificity,
            "auc": self.auc,
            "tp": self.counts.tp,
            "fp": self.counts.fp,
            "tn": self.counts.tn,
            "fn": self.counts.fn,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, d):
        counts = ConfusionCounts(tp=int(d["tp"]), fp=int(d["fp"]), tn=int(d["tn"]), fn=int(d["fn"]))
        return cls(ba=float(d["ba"]), sensitivity=float(d["sens"]), specificity=float(d["spec"]),
                   auc=float(d["auc"]), counts=counts, threshold=float(d["threshold"]))


def _check_binary(arr, what):
    arr = np.asarray(arr)
    if arr.ndim != 1:
        raise ValidationError(f"{what} must be one-dimensional, got shape {arr.shape}")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValidationError(f"{what} must contain only 0 and 1")
    return arr.astype(np.int64)


def confusion_counts(labels, predictions):
    labels = _check_binary(labels, "labels")
    predictions = _check_binary(predictions, "predictions")
    if labels.shape != predictions.shape:
        raise ValidationError(f"length mismatch: {labels.size} labels vs {predictions.size} predictions")
    tp = int(((labels == 1) & (predictions == 1)).sum())
    fp = int(((labels == 0) & (predictions == 1)).sum())
    tn = int(((labels == 0) & (predictions == 0)).sum())
    fn = int(((labels == 1) & (predictions == 0)).sum())
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def classification_metrics(counts):
    """Sensitivity, specificity, and their mean (balanced accuracy).

    Returns (ba, sensitivity, specificity). Refuses single-class inputs
    rather than inventing a 0 for an undefined ratio.
    """
    p, n = counts.positives, counts.negatives
    if p == 0 or n == 0:
        raise UndefinedMetricError(f"metrics undefined with P={p}, N={n}")
    sensitivity = counts.tp / p
    specificity = counts.tn / n
    ba = (sensitivity + specificity) / 2.0
    return ba, sensitivity, specificity


def roc_auc(labels, scores):
    """Mann-Whitney AUC: fraction of (positive, negative) pairs ranked
    correctly by score, ties counted one half."""
    labels = _check_binary(labels, "labels")
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.shape != labels.shape:
        raise ValidationError(f"scores shape {scores.shape} does not match labels shape {labels.shape}")
    if not np.isfinite(scores).all():
        raise ValidationError("scores must be finite")
    p = int(labels.sum())
    n = labels.size - p
    if p == 0 or n == 0:
        raise UndefinedMetricError(f"AUC undefined with P={p}, N={n}")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(labels.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < labels.size:
        j = i
        while j + 1 < labels.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # average 1-based rank across the tie group
        i = j + 1
    rank_sum = ranks[labels == 1].sum()
    return float((rank_sum - p * (p + 1) / 2.0) / (p * n))


def compute_report(labels, scores, threshold=0.5):
    """Full MetricsReport from task probabilities at a decision threshold."""
    labels = _check_binary(labels, "labels")
    scores = np.asarray(scores, dtype=np.float64)
    predictions = (scores >= threshold).astype(np.int64)
    counts = confusion_counts(labels, predictions)
    ba, sensitivity, specificity = classification_metrics(counts)
    auc = roc_auc(labels, scores)
    return MetricsReport(ba=ba, sensitivity=sensitivity, specificity=specificity,
                         auc=auc, counts=counts, threshold=float(threshold))
