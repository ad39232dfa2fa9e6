"""Analysis report assembly and text rendering.

The JSON report is schema-versioned and a pure function of its inputs
(digests included, timestamps deliberately absent) so repeated runs emit
identical bytes.
"""

from __future__ import annotations

import json
from typing import Sequence

from . import __version__
from .erroranalysis import StratifiedErrorTable, format_counts
from .hierarchy import (
    DEFAULT_EPSILON,
    DEFAULT_THRESHOLD,
    Branch,
    MULTICLASS,
    multiclass_prediction,
)
from .iov import (
    AgreementPattern,
    TimeAnalysis,
    annotator_report,
    error_by_agreement,
    rating_table,
    time_by_agreement,
)
from .metrics import accuracy, branch_report, fleiss_kappa
from .records import AnnotationRecord, PredictionRecord

SCHEMA_VERSION = 1


def task_metric_rows(
    records: Sequence[PredictionRecord],
    threshold: float = DEFAULT_THRESHOLD,
    epsilon: float = DEFAULT_EPSILON,
) -> list[dict]:
    """Per-task n/accuracy/AUC rows; the multi-class row has no AUCs."""
    rows = []
    for branch in Branch:
        r = branch_report(records, branch, threshold, epsilon)
        rows.append(
            {
                "task": r.task,
                "n": r.n,
                "accuracy": r.accuracy,
                "roc_auc": r.roc_auc,
                "pr_auc": r.pr_auc,
            }
        )
    predictions = [multiclass_prediction(r.probs) for r in records]
    truths = [r.label for r in records]
    rows.append(
        {
            "task": MULTICLASS,
            "n": len(records),
            "accuracy": accuracy(predictions, truths),
            "roc_auc": None,
            "pr_auc": None,
        }
    )
    return rows


def metrics_report(
    records: Sequence[PredictionRecord],
    annotations: Sequence[AnnotationRecord] | None = None,
    threshold: float = DEFAULT_THRESHOLD,
    epsilon: float = DEFAULT_EPSILON,
    input_digests: dict[str, str] | None = None,
) -> dict:
    """The full analysis report: per-task metrics, the suggestive-task
    error tree and class-by-view error table, plus annotator accuracies and
    rater agreement when annotations are supplied."""
    from .erroranalysis import (
        CLASS_ATTRIBUTE,
        build_error_tree,
        error_records_from_predictions,
        stratify_errors,
    )

    error_records = error_records_from_predictions(records, Branch.SUGG, threshold, epsilon)
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "inputs": input_digests or {},
        "threshold": threshold,
        "epsilon": epsilon,
        "tasks": task_metric_rows(records, threshold, epsilon),
        "error_tree": build_error_tree(error_records).to_dict(),
        "stratified_errors": table_dict(stratify_errors(error_records, CLASS_ATTRIBUTE, "view")),
    }
    if annotations is not None:
        annotators = sorted({a.annotator_id for a in annotations})
        per_annotator = {}
        for annotator in annotators:
            r = annotator_report(annotations, records, annotator)
            per_annotator[annotator] = {
                **{branch.value: r.branches[branch].accuracy for branch in Branch},
                MULTICLASS: r.multiclass_accuracy,
            }
        kappa = {}
        for task in [*Branch, MULTICLASS]:
            table = rating_table(records, annotations, task)
            kappa[task.value if isinstance(task, Branch) else task] = fleiss_kappa(table)
        report["annotator_accuracy"] = per_annotator
        report["fleiss_kappa"] = kappa
        report["error_by_agreement"] = {}
        for task in [*Branch, MULTICLASS]:
            name = task.value if isinstance(task, Branch) else task
            stats = error_by_agreement(records, annotations, task, threshold, epsilon)
            report["error_by_agreement"][name] = {
                pattern.token: {"errors": s.errors, "instances": s.instances, "rate": s.rate}
                for pattern, s in stats.items()
            }
        report["labelling_time"] = time_analysis_dict(time_by_agreement(annotations), 50.0)
    return report


def iov_report(
    records: Sequence[PredictionRecord],
    annotations: Sequence[AnnotationRecord],
    threshold: float = DEFAULT_THRESHOLD,
    epsilon: float = DEFAULT_EPSILON,
    time_threshold: float = 50.0,
    input_digests: dict[str, str] | None = None,
) -> dict:
    """Agreement-stratified error rates, annotator reports, rater agreement
    and labelling-time summaries."""
    disagreement = {}
    for task in [*Branch, MULTICLASS]:
        name = task.value if isinstance(task, Branch) else task
        stats = error_by_agreement(records, annotations, task, threshold, epsilon)
        disagreement[name] = {
            pattern.token: {"errors": s.errors, "instances": s.instances, "rate": s.rate}
            for pattern, s in stats.items()
        }

    annotators = sorted({a.annotator_id for a in annotations})
    per_annotator = {}
    for annotator in annotators:
        r = annotator_report(annotations, records, annotator)
        per_annotator[annotator] = {
            "multiclass": {"n": r.multiclass_n, "accuracy": r.multiclass_accuracy},
            **{
                branch.value: {
                    "n": s.n,
                    "accuracy": s.accuracy,
                    "fpr": s.point.fpr,
                    "tpr": s.point.tpr,
                }
                for branch, s in r.branches.items()
            },
        }

    kappa = {}
    for task in [*Branch, MULTICLASS]:
        table = rating_table(records, annotations, task)
        kappa[task.value if isinstance(task, Branch) else task] = fleiss_kappa(table)

    times = time_by_agreement(annotations, time_threshold)
    return {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "inputs": input_digests or {},
        "threshold": threshold,
        "epsilon": epsilon,
        "error_by_agreement": disagreement,
        "annotators": per_annotator,
        "fleiss_kappa": kappa,
        "labelling_time": time_analysis_dict(times, time_threshold),
    }


def time_analysis_dict(times: TimeAnalysis, time_threshold: float) -> dict:
    return {
        "exclusion_threshold_seconds": time_threshold,
        "excluded_over_threshold": times.excluded_over_threshold,
        "excluded_missing_annotation": times.excluded_missing,
        "excluded_no_duration": times.excluded_no_duration,
        "buckets": {
            pattern.token: {
                "n": s.n,
                "min": s.minimum,
                "q1": s.q1,
                "median": s.median,
                "q3": s.q3,
                "max": s.maximum,
                "mean": s.mean,
            }
            for pattern, s in times.buckets.items()
        },
    }


def time_summary_csv(times: TimeAnalysis) -> str:
    lines = ["bucket,n,min,q1,median,q3,max,mean"]
    for pattern in AgreementPattern:
        s = times.buckets[pattern]
        cells = [pattern.token, str(s.n)] + [
            "" if v is None else repr(v)
            for v in (s.minimum, s.q1, s.median, s.q3, s.maximum, s.mean)
        ]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def render_json(document: dict) -> str:
    return json.dumps(document, indent=2) + "\n"


def _metric_cell(value) -> str:
    return "" if value is None else f"{value:.3f}"


def metrics_csv(report: dict) -> str:
    lines = ["task,n,accuracy,roc_auc,pr_auc"]
    for row in report["tasks"]:
        lines.append(
            f"{row['task']},{row['n']},{_metric_cell(row['accuracy'])},"
            f"{_metric_cell(row['roc_auc'])},{_metric_cell(row['pr_auc'])}"
        )
    return "\n".join(lines) + "\n"


def metrics_markdown(report: dict) -> str:
    annotators = sorted(report.get("annotator_accuracy", {}))
    header = ["task", "n", "accuracy"] + annotators + ["roc_auc", "pr_auc"]
    if "fleiss_kappa" in report:
        header.append("kappa")
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for row in report["tasks"]:
        cells = [row["task"], str(row["n"]), _metric_cell(row["accuracy"])]
        for annotator in annotators:
            cells.append(_metric_cell(report["annotator_accuracy"][annotator][row["task"]]))
        cells += [_metric_cell(row["roc_auc"]), _metric_cell(row["pr_auc"])]
        if "fleiss_kappa" in report:
            cells.append(_metric_cell(report["fleiss_kappa"][row["task"]]))
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def table_csv(table: StratifiedErrorTable) -> str:
    lines = [f"{table.row_attr},{table.col_attr},errors,instances,rate"]

    def rate_cell(errors: int, instances: int) -> str:
        return "" if instances == 0 else repr(errors / instances)

    for r, row_value in enumerate(table.row_values):
        for c, col_value in enumerate(table.col_values):
            e, n = table.cell(r, c)
            lines.append(f"{row_value},{col_value},{e},{n},{rate_cell(e, n)}")
        e, n = table.row_total(r)
        lines.append(f"{row_value},TOTAL,{e},{n},{rate_cell(e, n)}")
    for c, col_value in enumerate(table.col_values):
        e, n = table.col_total(c)
        lines.append(f"TOTAL,{col_value},{e},{n},{rate_cell(e, n)}")
    e, n = table.grand_total()
    lines.append(f"TOTAL,TOTAL,{e},{n},{rate_cell(e, n)}")
    return "\n".join(lines) + "\n"


def table_text(table: StratifiedErrorTable) -> str:
    """Aligned text rendering with row/column totals."""
    header = [table.row_attr] + list(table.col_values) + ["total"]
    rows = [header]
    for r, row_value in enumerate(table.row_values):
        cells = [row_value]
        for c in range(len(table.col_values)):
            cells.append(format_counts(*table.cell(r, c)))
        cells.append(format_counts(*table.row_total(r)))
        rows.append(cells)
    footer = ["total"]
    for c in range(len(table.col_values)):
        footer.append(format_counts(*table.col_total(c)))
    footer.append(format_counts(*table.grand_total()))
    rows.append(footer)

    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip() for row in rows]
    return "\n".join(lines) + "\n"


def table_markdown(table: StratifiedErrorTable) -> str:
    header = [table.row_attr] + list(table.col_values) + ["total"]
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for r, row_value in enumerate(table.row_values):
        cells = [row_value]
        for c in range(len(table.col_values)):
            cells.append(format_counts(*table.cell(r, c)))
        cells.append(format_counts(*table.row_total(r)))
        lines.append("| " + " | ".join(cells) + " |")
    footer = ["total"]
    for c in range(len(table.col_values)):
        footer.append(format_counts(*table.col_total(c)))
    footer.append(format_counts(*table.grand_total()))
    lines.append("| " + " | ".join(footer) + " |")
    return "\n".join(lines) + "\n"


def table_dict(table: StratifiedErrorTable) -> dict:
    cells = {}
    for r, row_value in enumerate(table.row_values):
        for c, col_value in enumerate(table.col_values):
            e, n = table.cell(r, c)
            cells[f"{row_value}|{col_value}"] = {
                "errors": e,
                "instances": n,
                "rate": e / n if n else None,
            }
    grand_e, grand_n = table.grand_total()
    return {
        "row_attr": table.row_attr,
        "col_attr": table.col_attr,
        "cells": cells,
        "row_totals": {
            v: dict(zip(("errors", "instances"), table.row_total(r)))
            for r, v in enumerate(table.row_values)
        },
        "col_totals": {
            v: dict(zip(("errors", "instances"), table.col_total(c)))
            for c, v in enumerate(table.col_values)
        },
        "grand_total": {"errors": grand_e, "instances": grand_n},
    }
