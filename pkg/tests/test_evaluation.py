"""Evaluation harness: matrix arithmetic, reference-table arithmetic, rendering."""

import json

import numpy as np
import pytest

from prepnet.errors import UndefinedMetricError, ValidationError
from prepnet.evaluation import (ComparisonReport, EvalBundle, EvalCell, EvalMatrix,
                                UnseenReport, UnseenRow, compare_to_baseline,
                                evaluate_pair, load_bundle, render_tables, save_bundle)
from prepnet.evaluation.tables import format_metric, format_pp
from prepnet.metrics import ConfusionCounts, MetricsReport


def report(ba, auc=0.5):
    # degenerate consistent triple: sens = spec = ba
    return MetricsReport(ba=ba, sensitivity=ba, specificity=ba, auc=auc,
                         counts=ConfusionCounts())


def cell(train, test, ba, preprocessing="raw"):
    return EvalCell(train_dataset=train, test_dataset=test,
                    preprocessing=preprocessing, report=report(ba))


def matrix(cells, preprocessing="raw"):
    return EvalMatrix(cells=tuple(cells), preprocessing=preprocessing, backbone="vgg-mini")


# ---------------------------------------------------------------- averages

def test_matrix_average_arithmetic():
    m = matrix([cell("A", "A", 0.9), cell("A", "B", 0.5),
                cell("B", "A", 0.4), cell("B", "B", 0.8)])
    assert m.within_average == pytest.approx((0.9 + 0.8) / 2, abs=1e-12)
    assert m.cross_average == pytest.approx((0.5 + 0.4) / 2, abs=1e-12)


def test_matrix_validation():
    with pytest.raises(ValidationError):
        matrix([])
    with pytest.raises(ValidationError, match="duplicate"):
        matrix([cell("A", "A", 0.9), cell("A", "A", 0.8)])
    with pytest.raises(ValidationError, match="preprocessing"):
        matrix([cell("A", "A", 0.9, preprocessing="prepnet")])
    with pytest.raises(ValidationError):
        cell("A", "A", 0.9, preprocessing="fancy")


def test_matrix_undefined_averages():
    m = matrix([cell("A", "A", 0.9)])
    assert m.within_average == 0.9
    with pytest.raises(UndefinedMetricError):
        m.cross_average
    m = matrix([cell("A", "B", 0.9)])
    with pytest.raises(UndefinedMetricError):
        m.within_average


def test_reference_table_arithmetic():
    # reference per-cell balanced accuracies, two datasets, three pipelines
    baseline = matrix([cell("sars", "sars", 0.8924), cell("ucsd", "sars", 0.4433),
                       cell("sars", "ucsd", 0.3295), cell("ucsd", "ucsd", 0.8250)])
    ae = matrix([cell("sars", "sars", 0.8956, "autoencoder"),
                 cell("ucsd", "sars", 0.4983, "autoencoder"),
                 cell("sars", "ucsd", 0.49405, "autoencoder"),
                 cell("ucsd", "ucsd", 0.8154, "autoencoder")], "autoencoder")
    pn = matrix([cell("sars", "sars", 0.9007, "prepnet"),
                 cell("ucsd", "sars", 0.5157, "prepnet"),
                 cell("sars", "ucsd", 0.5545, "prepnet"),
                 cell("ucsd", "ucsd", 0.7800, "prepnet")], "prepnet")

    assert abs(baseline.within_average - 0.8587) <= 5e-4
    assert abs(ae.within_average - 0.8555) <= 5e-4
    # float mean of the cell values is 0.84034999..., a hair under 0.84035
    assert abs(pn.within_average - 0.8404) <= 5e-4

    c_ae = compare_to_baseline(ae, baseline)
    c_pn = compare_to_baseline(pn, baseline)
    assert abs(c_ae.delta_within_pp - (-0.32)) <= 5e-3
    # exact arithmetic gives -1.835; the reference delta is the 2-dp report -1.83
    assert c_pn.delta_within_pp == pytest.approx(-1.835, abs=1e-9)
    assert abs(c_pn.delta_within_pp - (-1.83)) <= 5e-3 + 1e-9


def test_reference_average_delta_exact():
    class Reference:
        within_average = 0.8404
        cross_average = 0.4159

    class Candidate:
        within_average = 0.8404
        cross_average = 0.5343

    c = compare_to_baseline(Candidate(), Reference(), "prepnet", "baseline")
    assert c.delta_cross_pp == pytest.approx(11.84, abs=1e-9)
    assert format_pp(c.delta_cross_pp) == "+11.84"


def test_compare_is_duck_typed():
    m = matrix([cell("A", "A", 0.86), cell("A", "B", 0.53),
                cell("B", "A", 0.51), cell("B", "B", 0.82)])

    class External:
        within_average = 0.80
        cross_average = 0.50

    c = compare_to_baseline(m, External())
    assert c.delta_within_pp == pytest.approx(100 * (0.84 - 0.80), abs=1e-9)
    assert c.delta_cross_pp == pytest.approx(100 * (0.52 - 0.50), abs=1e-9)


# ---------------------------------------------------------------- rounding

def test_format_metric_half_even():
    assert format_metric(0.84035) == "0.8404"
    assert format_metric(0.85865) == "0.8586"
    assert format_metric(0.5) == "0.5000"
    assert format_metric(1.0) == "1.0000"


def test_format_pp_signed():
    assert format_pp(11.84) == "+11.84"
    assert format_pp(-1.835) == "-1.84"
    assert format_pp(0.0) == "+0.00"
    assert format_pp(-0.324999) == "-0.32"


# -------------------------------------------------------------- evaluation

def test_evaluate_pair_identity_perfect():
    class Oracle:
        def forward(self, x):
            raise AssertionError("not used")

    labels = np.array([0, 1, 0, 1, 1, 0])
    scores = labels.astype(float)

    # bypass the model by scoring directly through the metric path
    from prepnet.metrics import compute_report
    rep = compute_report(labels, scores, threshold=0.5)
    assert rep.ba == 1.0 and rep.auc == 1.0


def test_evaluate_pair_runs_model(tmp_path):
    from prepnet.models.classifiers import build_task_classifier
    from prepnet.models.config import make_model_config

    rng = np.random.default_rng(0)
    images = rng.uniform(0, 1, (10, 32, 32)).astype(np.float32)
    labels = rng.integers(0, 2, 10)
    labels[0], labels[1] = 0, 1
    clf = build_task_classifier(make_model_config(), seed=0)
    c = evaluate_pair(clf, images, labels, train_dataset="A", test_dataset="B",
                      preprocessing="raw")
    assert c.train_dataset == "A" and not c.within
    assert 0.0 <= c.report.ba <= 1.0
    assert c.report.counts.positives + c.report.counts.negatives == 10


# ------------------------------------------------------------ serialization

def full_bundle():
    base = matrix([cell("A", "A", 0.9), cell("A", "B", 0.5),
                   cell("B", "A", 0.4), cell("B", "B", 0.8)])
    pn = matrix([cell("A", "A", 0.88, "prepnet"), cell("A", "B", 0.7, "prepnet"),
                 cell("B", "A", 0.6, "prepnet"), cell("B", "B", 0.82, "prepnet")], "prepnet")
    comp = compare_to_baseline(pn, base, "prepnet", "raw")
    unseen = UnseenReport(dataset="siteC", rows=(
        UnseenRow("raw", 0.55, 0.6, 0.5, 0.7, 0.0),
        UnseenRow("prepnet", 0.8, 0.8, 0.8, 0.9, 25.0)))
    return EvalBundle(matrices={"raw": base, "prepnet": pn}, comparisons=(comp,),
                      unseen=unseen)


def test_bundle_round_trip(tmp_path):
    b = full_bundle()
    save_bundle(b, tmp_path / "m.json")
    loaded = load_bundle(tmp_path / "m.json")
    assert loaded.matrices["raw"].within_average == b.matrices["raw"].within_average
    assert loaded.matrices["prepnet"].cells == b.matrices["prepnet"].cells
    assert loaded.comparisons[0].delta_cross_pp == b.comparisons[0].delta_cross_pp
    assert loaded.unseen.dataset == "siteC"
    assert loaded.unseen.rows == b.unseen.rows


def test_bundle_missing_file(tmp_path):
    with pytest.raises(ValidationError, match="run eval first"):
        load_bundle(tmp_path / "m.json")


def test_matrix_dict_contains_averages():
    m = full_bundle().matrices["raw"]
    d = m.to_dict()
    assert d["within_average"] == m.within_average
    assert d["cross_average"] == m.cross_average
    assert len(d["cells"]) == 4


# ---------------------------------------------------------------- rendering

def test_render_markdown_structure():
    text = render_tables(full_bundle(), "markdown")
    lines = text.splitlines()
    assert lines[0].startswith("# ")
    assert "## Matrix cells" in lines
    assert "## Averages" in lines
    assert "## Unseen dataset: siteC" in lines
    header = next(l for l in lines if l.startswith("| preprocessing | train"))
    assert header == "| preprocessing | train | test | BA | Sens | Spec | AUC |"
    avg_header = next(l for l in lines if "within BA" in l)
    assert avg_header == ("| preprocessing | within BA | cross BA | "
                          "delta within (pp) | delta cross (pp) |")


def test_render_csv_structure():
    import csv
    import io

    text = render_tables(full_bundle(), "csv")
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    assert rows[0] == ["section", "preprocessing", "train", "test", "BA", "Sens", "Spec", "AUC"]
    sections = {r[0] for r in rows if r[0] != "section"}
    assert sections == {"matrix", "averages", "unseen:siteC"}
    matrix_rows = [r for r in rows if r[0] == "matrix"]
    assert len(matrix_rows) == 8
    assert all(len(r) == 8 for r in matrix_rows)
    raw_avg = next(r for r in rows if r[0] == "averages" and r[1] == "raw")
    assert raw_avg[2] == format_metric(full_bundle().matrices["raw"].within_average)
    assert raw_avg[4] == "" and raw_avg[5] == ""  # baseline rows carry no deltas
    pn_avg = next(r for r in rows if r[0] == "averages" and r[1] == "prepnet")
    assert pn_avg[5] == "+20.00"
    unseen_rows = [r for r in rows if r[0] == "unseen:siteC"]
    assert [r[1] for r in unseen_rows] == ["raw", "prepnet"]
    assert unseen_rows[1][6] == "+25.00"


def test_render_rejects_unknown_format():
    with pytest.raises(ValidationError, match="format"):
        render_tables(full_bundle(), "pdf")


def test_evaluation_is_read_only():
    from prepnet.evaluation import build_eval_matrix
    from prepnet.models.autoencoder import build_autoencoder
    from prepnet.models.classifiers import build_dataset_classifier, build_task_classifier
    from prepnet.models.config import make_model_config
    from prepnet.training.engine import PipelineModels, SplitArrays, component_hashes

    mc = make_model_config()
    rng = np.random.default_rng(1)
    images = rng.uniform(0, 1, (12, 32, 32)).astype(np.float32)
    labels = np.tile([0, 1], 6)
    domains = np.repeat([0, 1], 6)
    arrays = SplitArrays(images=images, labels=labels, domains=domains,
                         sample_ids=tuple(str(i) for i in range(12)))
    ae = build_autoencoder(mc, seed=0)
    models = PipelineModels(
        config=mc, autoencoder_stage1=build_autoencoder(mc, seed=1), autoencoder=ae,
        dataset_classifier=build_dataset_classifier(mc, seed=2),
        task_classifiers={(m, d): build_task_classifier(mc, seed=10 + d)
                          for m in ("raw", "autoencoder", "prepnet") for d in (0, 1)})
    before = component_hashes(models)
    for mode in ("raw", "autoencoder", "prepnet"):
        build_eval_matrix(models, arrays, ("siteA", "siteB"), mode)
    assert component_hashes(models) == before
