"""Metric semantics checked against independent brute-force oracles."""

import numpy as np
import pytest

from prepnet import metrics
from prepnet.errors import UndefinedMetricError, ValidationError
from prepnet.metrics import ConfusionCounts, MetricsReport


def bruteforce_counts(labels, preds):
    tp = fp = tn = fn = 0
    for l, p in zip(labels, preds):
        if l == 1 and p == 1:
            tp += 1
        elif l == 0 and p == 1:
            fp += 1
        elif l == 0 and p == 0:
            tn += 1
        else:
            fn += 1
    return tp, fp, tn, fn


def bruteforce_auc(labels, scores):
    num = 0.0
    pairs = 0
    for i, li in enumerate(labels):
        if li != 1:
            continue
        for j, lj in enumerate(labels):
            if lj != 0:
                continue
            pairs += 1
            if scores[i] > scores[j]:
                num += 1.0
            elif scores[i] == scores[j]:
                num += 0.5
    return num / pairs


def test_confusion_examples():
    c = metrics.confusion_counts([1, 1, 0, 0], [1, 0, 0, 1])
    assert (c.tp, c.fn, c.tn, c.fp) == (1, 1, 1, 1)
    c = metrics.confusion_counts([1, 0, 1], [1, 0, 1])
    assert c.fp == 0 and c.fn == 0
    c = metrics.confusion_counts([1, 0, 1], [0, 1, 0])
    assert c.tp == 0 and c.tn == 0


def test_confusion_length_mismatch():
    with pytest.raises(ValidationError):
        metrics.confusion_counts([1, 0], [1])


def test_confusion_rejects_non_binary():
    with pytest.raises(ValidationError):
        metrics.confusion_counts([1, 2], [1, 0])


def test_counts_invariants():
    c = ConfusionCounts(tp=3, fp=2, tn=5, fn=1)
    assert c.positives == 4 and c.negatives == 7
    with pytest.raises(ValidationError):
        ConfusionCounts(tp=-1, fp=0, tn=0, fn=0)


def test_metrics_examples():
    ba, sens, spec = metrics.classification_metrics(ConfusionCounts(tp=9, fn=1, tn=8, fp=2))
    assert sens == 0.9 and spec == 0.8
    assert abs(ba - 0.85) < 1e-12
    ba, sens, spec = metrics.classification_metrics(ConfusionCounts(tp=5, fn=0, tn=7, fp=0))
    assert ba == 1.0
    # always-positive predictor
    ba, sens, spec = metrics.classification_metrics(ConfusionCounts(tp=6, fn=0, tn=0, fp=4))
    assert sens == 1.0 and spec == 0.0 and ba == 0.5


def test_metrics_undefined_on_single_class():
    with pytest.raises(UndefinedMetricError):
        metrics.classification_metrics(ConfusionCounts(tp=5, fn=2, tn=0, fp=0))
    with pytest.raises(UndefinedMetricError):
        metrics.classification_metrics(ConfusionCounts(tp=0, fn=0, tn=5, fp=2))


def test_metrics_match_bruteforce_on_random_sets():
    rng = np.random.default_rng(20)
    for _ in range(300):
        n = int(rng.integers(2, 40))
        labels = rng.integers(0, 2, n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        preds = rng.integers(0, 2, n)
        c = metrics.confusion_counts(labels, preds)
        tp, fp, tn, fn = bruteforce_counts(labels, preds)
        assert (c.tp, c.fp, c.tn, c.fn) == (tp, fp, tn, fn)
        ba, sens, spec = metrics.classification_metrics(c)
        assert sens == tp / (tp + fn)
        assert spec == tn / (tn + fp)
        assert ba == (sens + spec) / 2


def test_ba_invariant_under_label_and_prediction_flip():
    rng = np.random.default_rng(21)
    for _ in range(50):
        n = int(rng.integers(4, 30))
        labels = rng.integers(0, 2, n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        preds = rng.integers(0, 2, n)
        ba1, sens1, spec1 = metrics.classification_metrics(metrics.confusion_counts(labels, preds))
        ba2, sens2, spec2 = metrics.classification_metrics(metrics.confusion_counts(1 - labels, 1 - preds))
        assert ba1 == ba2
        assert sens1 == spec2 and spec1 == sens2


def test_auc_examples():
    assert metrics.roc_auc([0, 1, 0, 1], [0.1, 0.4, 0.5, 0.8]) == 0.75
    assert metrics.roc_auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]) == 1.0
    assert metrics.roc_auc([0, 1, 0, 1], [0.5, 0.5, 0.5, 0.5]) == 0.5


def test_auc_matches_bruteforce_with_ties():
    rng = np.random.default_rng(22)
    for _ in range(200):
        n = int(rng.integers(3, 25))
        labels = rng.integers(0, 2, n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        # quantized scores force frequent ties
        scores = np.round(rng.uniform(0, 1, n), 1)
        assert abs(metrics.roc_auc(labels, scores) - bruteforce_auc(labels, scores)) < 1e-12


def test_auc_invariant_under_monotone_transform():
    rng = np.random.default_rng(23)
    labels = rng.integers(0, 2, 50)
    labels[0], labels[1] = 0, 1
    scores = rng.standard_normal(50)
    assert metrics.roc_auc(labels, scores) == metrics.roc_auc(labels, np.exp(scores))


def test_auc_single_class_undefined():
    with pytest.raises(UndefinedMetricError):
        metrics.roc_auc([1, 1, 1], [0.1, 0.5, 0.9])


def test_auc_rejects_non_finite_scores():
    with pytest.raises(ValidationError):
        metrics.roc_auc([0, 1], [0.1, float("nan")])


def test_report_serialization_round_trip():
    rep = metrics.compute_report(np.array([0, 1, 0, 1]), np.array([0.2, 0.8, 0.4, 0.6]))
    d = rep.to_dict()
    assert list(d) == ["ba", "sens", "spec", "auc", "tp", "fp", "tn", "fn", "threshold"]
    assert MetricsReport.from_dict(d) == rep


def test_report_rejects_inconsistent_ba():
    with pytest.raises(ValidationError):
        MetricsReport(ba=0.9, sensitivity=0.5, specificity=0.5, auc=0.5,
                      counts=ConfusionCounts(tp=1, fp=1, tn=1, fn=1))


def test_report_threshold_semantics():
    labels = np.array([0, 1, 1])
    scores = np.array([0.2, 0.5, 0.9])
    rep = metrics.compute_report(labels, scores, threshold=0.5)
    # score >= threshold predicts positive
    assert rep.counts.tp == 2 and rep.counts.tn == 1
    rep = metrics.compute_report(labels, scores, threshold=0.6)
    assert rep.counts.tp == 1 and rep.counts.fn == 1
