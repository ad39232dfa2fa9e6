"""Command-line surface tying the analyses together.

Every subcommand validates its inputs before writing anything, and all
output is byte-deterministic for fixed inputs and flags.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import fixtures
from .erroranalysis import (
    CLASS_ATTRIBUTE,
    build_error_tree,
    emit_tree_dot,
    error_records_from_predictions,
    stratify_errors,
)
from .folds import ensemble_by_image, stratified_group_kfold
from .hierarchy import Branch, DEFAULT_EPSILON, DEFAULT_THRESHOLD, aggregate, parse_task
from .io import (
    IngestionError,
    atomic_write,
    fold_assignment_csv,
    load_annotations,
    load_cohort_spec,
    load_predictions,
    predictions_csv,
    sha256_file,
)
from .iov import annotator_error_records
from .report import (
    iov_report,
    metrics_csv,
    metrics_markdown,
    metrics_report,
    render_json,
    table_csv,
    table_dict,
    table_markdown,
    table_text,
    time_summary_csv,
)
from .synth import generate

FIXTURE_BUILDERS = {
    "view-pcr": lambda: generate(fixtures.view_pcr_error_cohort()),
    "class-view": lambda: generate(fixtures.class_view_error_cohort()),
}


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        atomic_write(output, text)


def _digests(**paths: str | None) -> dict[str, str]:
    return {name: sha256_file(path) for name, path in paths.items() if path is not None}


def _add_common(parser: argparse.ArgumentParser, *, threshold=False, epsilon=False) -> None:
    parser.add_argument("--output", "-o", help="output file (default: stdout)")
    if threshold:
        parser.add_argument(
            "--threshold", type=float, default=DEFAULT_THRESHOLD, help="branch decision threshold"
        )
    if epsilon:
        parser.add_argument(
            "--epsilon", type=float, default=DEFAULT_EPSILON, help="degenerate-denominator cutoff"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cxreval",
        description="Hierarchical evaluation and failure-mode analysis of four-class "
        "chest X-ray triage predictions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("aggregate", help="emit per-image branch probabilities")
    p.add_argument("--predictions", required=True)
    _add_common(p, epsilon=True)

    p = sub.add_parser("metrics", help="per-task accuracy and AUC report")
    p.add_argument("--predictions", required=True)
    p.add_argument("--annotations", help="adds annotator accuracies and rater agreement")
    p.add_argument("--format", choices=("json", "csv", "md"), default="json")
    p.add_argument("--curves-dir", help="also write per-branch ROC/PR curve CSVs here")
    _add_common(p, threshold=True, epsilon=True)

    p = sub.add_parser("error-tree", help="decision tree over error predictors")
    p.add_argument("--predictions", required=True)
    p.add_argument("--task", default="sugg")
    p.add_argument("--max-depth", type=int, default=2)
    p.add_argument("--min-leaf", type=int, default=20)
    p.add_argument("--format", choices=("dot", "json"), default="dot")
    _add_common(p, threshold=True, epsilon=True)

    p = sub.add_parser("stratify", help="error counts stratified by two attributes")
    p.add_argument("--predictions", required=True)
    p.add_argument("--task", default="sugg")
    p.add_argument("--rows", default=CLASS_ATTRIBUTE)
    p.add_argument("--cols", default="view")
    p.add_argument("--annotations", help="with --annotator: tabulate annotator disagreement")
    p.add_argument("--annotator", help="annotator id whose disagreements to tabulate")
    p.add_argument("--format", choices=("csv", "md", "text", "json"), default="text")
    _add_common(p, threshold=True, epsilon=True)

    p = sub.add_parser("iov", help="inter-observer variability report")
    p.add_argument("--predictions", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--time-threshold", type=float, default=50.0)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    _add_common(p, threshold=True, epsilon=True)

    p = sub.add_parser("split", help="patient-grouped stratified K-fold assignment")
    p.add_argument("--predictions", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)

    p = sub.add_parser("ensemble", help="average multi-fold predictions per image")
    p.add_argument("--predictions", required=True)
    _add_common(p)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--spec", help="cohort spec JSON")
    group.add_argument("--fixture", choices=sorted(FIXTURE_BUILDERS))
    p.add_argument("--seed", type=int, help="override the spec seed")
    _add_common(p)

    return parser


def _run_aggregate(args) -> None:
    records = load_predictions(args.predictions)
    lines = ["image_id,p_sugg,p_classic_given_sugg,p_other_given_not_sugg"]
    for record in records:
        bp = aggregate(record.probs, args.epsilon)
        cells = [record.image_id, repr(bp.p_sugg)]
        for value in (bp.p_classic_given_sugg, bp.p_other_given_not_sugg):
            cells.append("" if value is None else repr(value))
        lines.append(",".join(cells))
    _emit("\n".join(lines) + "\n", args.output)


def _run_metrics(args) -> None:
    records = load_predictions(args.predictions)
    annotations = load_annotations(args.annotations) if args.annotations else None
    report = metrics_report(
        records,
        annotations,
        args.threshold,
        args.epsilon,
        _digests(predictions=args.predictions, annotations=args.annotations),
    )
    if args.curves_dir:
        from .io import curve_csv
        from .metrics import branch_samples, pr_curve, roc_curve

        directory = Path(args.curves_dir)
        directory.mkdir(parents=True, exist_ok=True)
        for branch in Branch:
            samples = branch_samples(records, branch, args.epsilon)
            atomic_write(
                directory / f"roc_{branch.value}.csv",
                curve_csv(roc_curve(samples).points, "fpr", "tpr"),
            )
            atomic_write(
                directory / f"pr_{branch.value}.csv",
                curve_csv(pr_curve(samples).points, "recall", "precision"),
            )
    if args.format == "json":
        _emit(render_json(report), args.output)
    elif args.format == "csv":
        _emit(metrics_csv(report), args.output)
    else:
        _emit(metrics_markdown(report), args.output)


def _run_error_tree(args) -> None:
    records = load_predictions(args.predictions)
    error_records = error_records_from_predictions(
        records, parse_task(args.task), args.threshold, args.epsilon
    )
    tree = build_error_tree(error_records, max_depth=args.max_depth, min_leaf=args.min_leaf)
    if args.format == "dot":
        _emit(emit_tree_dot(tree), args.output)
    else:
        _emit(render_json(tree.to_dict()), args.output)


def _run_stratify(args) -> None:
    records = load_predictions(args.predictions)
    task = parse_task(args.task)
    if args.annotator:
        if not args.annotations:
            raise IngestionError("--annotator requires --annotations")
        annotations = load_annotations(args.annotations)
        error_records = annotator_error_records(records, annotations, args.annotator, task)
        if not error_records:
            raise IngestionError(f"annotator {args.annotator!r} has no overlapping labels")
    else:
        error_records = error_records_from_predictions(records, task, args.threshold, args.epsilon)
    table = stratify_errors(error_records, args.rows, args.cols)
    renderer = {
        "csv": table_csv,
        "md": table_markdown,
        "text": table_text,
        "json": lambda t: render_json(table_dict(t)),
    }[args.format]
    _emit(renderer(table), args.output)


def _run_iov(args) -> None:
    records = load_predictions(args.predictions)
    annotations = load_annotations(args.annotations)
    if args.format == "csv":
        from .iov import time_by_agreement

        _emit(time_summary_csv(time_by_agreement(annotations, args.time_threshold)), args.output)
        return
    report = iov_report(
        records,
        annotations,
        args.threshold,
        args.epsilon,
        args.time_threshold,
        _digests(predictions=args.predictions, annotations=args.annotations),
    )
    _emit(render_json(report), args.output)


def _run_split(args) -> None:
    records = load_predictions(args.predictions)
    assignment = stratified_group_kfold(records, args.k, args.seed)
    _emit(fold_assignment_csv(assignment), args.output)


def _run_ensemble(args) -> None:
    records = load_predictions(args.predictions)
    _emit(predictions_csv(ensemble_by_image(records)), args.output)


def _run_synth(args) -> None:
    if args.fixture:
        records = FIXTURE_BUILDERS[args.fixture]()
    else:
        spec = load_cohort_spec(args.spec)
        if args.seed is not None:
            from dataclasses import replace

            spec = replace(spec, seed=args.seed)
        records = generate(spec)
    _emit(predictions_csv(records), args.output)


_RUNNERS = {
    "aggregate": _run_aggregate,
    "metrics": _run_metrics,
    "error-tree": _run_error_tree,
    "stratify": _run_stratify,
    "iov": _run_iov,
    "split": _run_split,
    "ensemble": _run_ensemble,
    "synth": _run_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _RUNNERS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
