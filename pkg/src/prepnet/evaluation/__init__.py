from .harness import (ComparisonReport, EvalBundle, EvalCell, EvalMatrix, UnseenReport,
                      UnseenRow, build_eval_matrix, compare_to_baseline, evaluate_pair,
                      evaluate_unseen, load_bundle, save_bundle)
from .tables import format_metric, format_pp, render_tables

__all__ = [
    "ComparisonReport", "EvalBundle", "EvalCell", "EvalMatrix", "UnseenReport", "UnseenRow",
    "build_eval_matrix", "compare_to_baseline", "evaluate_pair", "evaluate_unseen",
    "format_metric", "format_pp", "load_bundle", "render_tables", "save_bundle",
]
