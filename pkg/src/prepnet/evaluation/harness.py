"""Cross-dataset evaluation harness.

A matrix cell is one (train dataset, test dataset) pair scored with a
fixed 0.5 decision threshold. The matrix averages the diagonal
(within-dataset) and off-diagonal (cross-dataset) balanced accuracies
separately, and a comparison report expresses candidate-minus-baseline
differences of those averages in percentage points. Evaluation never
touches model parameters.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import UndefinedMetricError, ValidationError
from ..metrics import MetricsReport, compute_report
from ..training.engine import TASK_MODES, reconstruct_dataset, task_scores

_MODES = set(TASK_MODES)


@dataclass(frozen=True)
class EvalCell:
    train_dataset: str
    test_dataset: str
    preprocessing: str
    report: MetricsReport

    def __post_init__(self):
        if self.preprocessing not in _MODES:
            raise ValidationError(
                f"preprocessing must be one of {sorted(_MODES)}, got {self.preprocessing!r}")

    @property
    def within(self):
        return self.train_dataset == self.test_dataset

    def to_dict(self):
        return {"train_dataset": self.train_dataset, "test_dataset": self.test_dataset,
                "preprocessing": self.preprocessing, "report": self.report.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(train_dataset=d["train_dataset"], test_dataset=d["test_dataset"],
                   preprocessing=d["preprocessing"],
                   report=MetricsReport.from_dict(d["report"]))


@dataclass(frozen=True)
class EvalMatrix:
    cells: tuple
    preprocessing: str
    backbone: str

    def __post_init__(self):
        if not self.cells:
            raise ValidationError("matrix needs at least one cell")
        object.__setattr__(self, "cells", tuple(self.cells))
        for cell in self.cells:
            if cell.preprocessing != self.preprocessing:
                raise ValidationError(
                    f"cell preprocessing {cell.preprocessing!r} does not match "
                    f"matrix {self.preprocessing!r}")
        seen = {(c.train_dataset, c.test_dataset) for c in self.cells}
        if len(seen) != len(self.cells):
            raise ValidationError("duplicate (train, test) cell")

    @property
    def within_average(self):
        vals = [c.report.ba for c in self.cells if c.within]
        if not vals:
            raise UndefinedMetricError("matrix has no within-dataset cells")
        return float(np.mean(vals))

    @property
    def cross_average(self):
        vals = [c.report.ba for c in self.cells if not c.within]
        if not vals:
            raise UndefinedMetricError("matrix has no cross-dataset cells")
        return float(np.mean(vals))

    def cell(self, train_dataset, test_dataset):
        for c in self.cells:
            if c.train_dataset == train_dataset and c.test_dataset == test_dataset:
                return c
        raise KeyError((train_dataset, test_dataset))

    def to_dict(self):
        return {"preprocessing": self.preprocessing, "backbone": self.backbone,
                "within_average": self.within_average, "cross_average": self.cross_average,
                "cells": [c.to_dict() for c in self.cells]}

    @classmethod
    def from_dict(cls, d):
        return cls(cells=tuple(EvalCell.from_dict(c) for c in d["cells"]),
                   preprocessing=d["preprocessing"], backbone=d["backbone"])


@dataclass(frozen=True)
class ComparisonReport:
    candidate: str
    baseline: str
    delta_within_pp: float
    delta_cross_pp: float

    def to_dict(self):
        return {"candidate": self.candidate, "baseline": self.baseline,
                "delta_within_pp": self.delta_within_pp,
                "delta_cross_pp": self.delta_cross_pp}

    @classmethod
    def from_dict(cls, d):
        return cls(candidate=d["candidate"], baseline=d["baseline"],
                   delta_within_pp=float(d["delta_within_pp"]),
                   delta_cross_pp=float(d["delta_cross_pp"]))


@dataclass(frozen=True)
class UnseenRow:
    preprocessing: str
    ba: float
    sens: float
    spec: float
    auc: float
    delta_ba_pp: float

    def to_dict(self):
        return {"preprocessing": self.preprocessing, "ba": self.ba, "sens": self.sens,
                "spec": self.spec, "auc": self.auc, "delta_ba_pp": self.delta_ba_pp}

    @classmethod
    def from_dict(cls, d):
        return cls(preprocessing=d["preprocessing"], ba=float(d["ba"]), sens=float(d["sens"]),
                   spec=float(d["spec"]), auc=float(d["auc"]),
                   delta_ba_pp=float(d["delta_ba_pp"]))


@dataclass(frozen=True)
class UnseenReport:
    dataset: str
    rows: tuple

    def to_dict(self):
        return {"dataset": self.dataset, "rows": [r.to_dict() for r in self.rows]}

    @classmethod
    def from_dict(cls, d):
        return cls(dataset=d["dataset"],
                   rows=tuple(UnseenRow.from_dict(r) for r in d["rows"]))


def evaluate_pair(classifier, images, labels, autoencoder=None, threshold=0.5,
                  train_dataset="", test_dataset="", preprocessing="raw"):
    """Score one classifier on one test set; reconstruction first when an
    autoencoder is given."""
    if len(images) == 0:
        raise ValidationError("empty test set")
    inputs = images if autoencoder is None else reconstruct_dataset(autoencoder, images)
    scores = task_scores(classifier, inputs)
    report = compute_report(labels, scores, threshold=threshold)
    return EvalCell(train_dataset=train_dataset, test_dataset=test_dataset,
                    preprocessing=preprocessing, report=report)


def build_eval_matrix(models, test_arrays, domain_names, preprocessing, threshold=0.5):
    """Every (train, test) dataset pair for one preprocessing mode."""
    if preprocessing not in _MODES:
        raise ValidationError(
            f"preprocessing must be one of {sorted(_MODES)}, got {preprocessing!r}")
    ae = {"raw": None,
          "autoencoder": models.autoencoder_stage1,
          "prepnet": models.autoencoder}[preprocessing]
    recon = None if ae is None else reconstruct_dataset(ae, test_arrays.images)
    inputs = test_arrays.images if recon is None else recon
    cells = []
    for ds_train, train_name in enumerate(domain_names):
        clf = models.task_classifiers.get((preprocessing, ds_train))
        if clf is None:
            raise ValidationError(f"no task classifier for ({preprocessing}, {ds_train})")
        for ds_test, test_name in enumerate(domain_names):
            sel = test_arrays.domains == ds_test
            if not np.any(sel):
                raise ValidationError(f"test split has no samples for dataset {test_name}")
            scores = task_scores(clf, inputs[sel])
            report = compute_report(test_arrays.labels[sel], scores, threshold=threshold)
            cells.append(EvalCell(train_dataset=train_name, test_dataset=test_name,
                                  preprocessing=preprocessing, report=report))
    return EvalMatrix(cells=tuple(cells), preprocessing=preprocessing,
                      backbone=models.config.backbone_name)


def compare_to_baseline(candidate, baseline, candidate_name=None, baseline_name=None):
    """Percentage-point deltas of the within and cross averages.

    Accepts anything exposing within_average and cross_average, so
    externally reported averages can be compared as easily as freshly
    computed matrices.
    """
    return ComparisonReport(
        candidate=candidate_name or getattr(candidate, "preprocessing", "candidate"),
        baseline=baseline_name or getattr(baseline, "preprocessing", "baseline"),
        delta_within_pp=100.0 * (candidate.within_average - baseline.within_average),
        delta_cross_pp=100.0 * (candidate.cross_average - baseline.cross_average))


def evaluate_unseen(models, images, labels, dataset_name="unseen", threshold=0.5):
    """Generalization to a domain never seen in training.

    Each preprocessing mode averages its per-training-dataset
    classifiers' metrics on the unseen data; deltas are balanced
    accuracy in percentage points relative to the raw row.
    """
    if len(images) == 0:
        raise ValidationError("empty unseen set")
    ae_by_mode = {"raw": None, "autoencoder": models.autoencoder_stage1,
                  "prepnet": models.autoencoder}
    raw_ba = None
    rows = []
    for mode in TASK_MODES:
        ae = ae_by_mode[mode]
        inputs = images if ae is None else reconstruct_dataset(ae, images)
        reports = []
        for (m, ds), clf in sorted(models.task_classifiers.items()):
            if m != mode:
                continue
            scores = task_scores(clf, inputs)
            reports.append(compute_report(labels, scores, threshold=threshold))
        if not reports:
            raise ValidationError(f"no task classifiers for mode {mode!r}")
        ba = float(np.mean([r.ba for r in reports]))
        if mode == "raw":
            raw_ba = ba
        rows.append(UnseenRow(
            preprocessing=mode, ba=ba,
            sens=float(np.mean([r.sensitivity for r in reports])),
            spec=float(np.mean([r.specificity for r in reports])),
            auc=float(np.mean([r.auc for r in reports])),
            delta_ba_pp=100.0 * (ba - raw_ba)))
    return UnseenReport(dataset=dataset_name, rows=tuple(rows))


@dataclass(frozen=True)
class EvalBundle:
    """Everything one `eval` invocation produced, as stored in
    metrics/matrix.json."""
    matrices: dict
    comparisons: tuple
    unseen: object = None
    threshold: float = 0.5

    def to_dict(self):
        return {
            "threshold": self.threshold,
            "matrices": {k: m.to_dict() for k, m in self.matrices.items()},
            "comparisons": [c.to_dict() for c in self.comparisons],
            "unseen": None if self.unseen is None else self.unseen.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            matrices={k: EvalMatrix.from_dict(m) for k, m in d["matrices"].items()},
            comparisons=tuple(ComparisonReport.from_dict(c) for c in d["comparisons"]),
            unseen=None if d.get("unseen") is None else UnseenReport.from_dict(d["unseen"]),
            threshold=float(d.get("threshold", 0.5)))


def save_bundle(bundle, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(bundle.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_bundle(path):
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"no evaluation results at {path}; run eval first")
    return EvalBundle.from_dict(json.loads(path.read_text(encoding="utf-8")))
