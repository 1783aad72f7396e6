"""Table rendering for evaluation results.

Metric columns always appear in the order BA, Sens, Spec, AUC, followed
by averages and then deltas. Metrics are printed with four decimals and
percentage-point deltas with two, both under banker's rounding.
"""

import csv
import io
from decimal import ROUND_HALF_EVEN, Decimal

from ..errors import ValidationError

_METRIC_Q = Decimal("0.0001")
_PP_Q = Decimal("0.01")


def format_metric(value):
    """Four decimals, round-half-even: 0.84035 -> '0.8404'."""
    return str(Decimal(repr(float(value))).quantize(_METRIC_Q, rounding=ROUND_HALF_EVEN))


def format_pp(value):
    """Signed two-decimal percentage points: 11.8399.. -> '+11.84'."""
    q = Decimal(repr(float(value))).quantize(_PP_Q, rounding=ROUND_HALF_EVEN)
    text = str(q)
    return text if text.startswith("-") else "+" + text


def _matrix_rows(matrix):
    rows = []
    for cell in matrix.cells:
        r = cell.report
        rows.append([matrix.preprocessing, cell.train_dataset, cell.test_dataset,
                     format_metric(r.ba), format_metric(r.sensitivity),
                     format_metric(r.specificity), format_metric(r.auc)])
    return rows


def _average_rows(bundle):
    deltas = {c.candidate: c for c in bundle.comparisons}
    rows = []
    for name, matrix in bundle.matrices.items():
        comp = deltas.get(name)
        rows.append([name,
                     format_metric(matrix.within_average),
                     format_metric(matrix.cross_average),
                     format_pp(comp.delta_within_pp) if comp else "",
                     format_pp(comp.delta_cross_pp) if comp else ""])
    return rows


def _unseen_rows(unseen):
    rows = []
    for row in unseen.rows:
        rows.append([row.preprocessing, format_metric(row.ba), format_metric(row.sens),
                     format_metric(row.spec), format_metric(row.auc),
                     format_pp(row.delta_ba_pp)])
    return rows


def _markdown_table(header, rows):
    out = ["| " + " | ".join(header) + " |",
           "| " + " | ".join("---" for _ in header) + " |"]
    for row in rows:
        out.append("| " + " | ".join(row) + " |")
    return "\n".join(out)


def render_tables(bundle, fmt="markdown"):
    """Render a full evaluation bundle as markdown or csv text."""
    if fmt not in ("markdown", "md", "csv"):
        raise ValidationError(f"format must be 'csv' or 'markdown', got {fmt!r}")
    cell_header = ["preprocessing", "train", "test", "BA", "Sens", "Spec", "AUC"]
    avg_header = ["preprocessing", "within BA", "cross BA",
                  "delta within (pp)", "delta cross (pp)"]
    unseen_header = ["preprocessing", "BA", "Sens", "Spec", "AUC", "delta BA (pp)"]

    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["section"] + cell_header)
        for name in bundle.matrices:
            for row in _matrix_rows(bundle.matrices[name]):
                writer.writerow(["matrix"] + row)
        writer.writerow([])
        writer.writerow(["section"] + avg_header)
        for row in _average_rows(bundle):
            writer.writerow(["averages"] + row)
        if bundle.unseen is not None:
            writer.writerow([])
            writer.writerow(["section"] + unseen_header)
            for row in _unseen_rows(bundle.unseen):
                writer.writerow([f"unseen:{bundle.unseen.dataset}"] + row)
        return buf.getvalue()

    backbone = next(iter(bundle.matrices.values())).backbone if bundle.matrices else ""
    parts = [f"# Cross-dataset evaluation ({backbone})", ""]
    all_cell_rows = []
    for name in bundle.matrices:
        all_cell_rows.extend(_matrix_rows(bundle.matrices[name]))
    parts.append("## Matrix cells")
    parts.append("")
    parts.append(_markdown_table(cell_header, all_cell_rows))
    parts.append("")
    parts.append("## Averages")
    parts.append("")
    parts.append(_markdown_table(avg_header, _average_rows(bundle)))
    if bundle.unseen is not None:
        parts.append("")
        parts.append(f"## Unseen dataset: {bundle.unseen.dataset}")
        parts.append("")
        parts.append(_markdown_table(unseen_header, _unseen_rows(bundle.unseen)))
    parts.append("")
    return "\n".join(parts)
