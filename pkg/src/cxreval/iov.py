"""Inter-observer variability analysis.

Agreement patterns across the three annotators, model error rates
stratified by agreement, per-annotator accuracies and operating points, and
labelling-time summaries.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

from .erroranalysis import CLASS_ATTRIBUTE, ErrorRecord
from .hierarchy import (
    DEFAULT_EPSILON,
    DEFAULT_THRESHOLD,
    Branch,
    MULTICLASS,
    aggregate,
    branch_binary,
    branch_truth,
    multiclass_prediction,
    task_name,
)
from .metrics import OperatingPoint, accuracy, operating_point
from .records import AnnotationRecord, PredictionRecord

logger = logging.getLogger(__name__)

RATER_COUNT = 3


class AgreementPattern(Enum):
    FULL = "3"
    PARTIAL = "2:1"
    NONE = "1:1:1"

    @property
    def token(self) -> str:
        return self.value


class ErrorStat(NamedTuple):
    errors: int
    instances: int
    rate: float | None


class TimeSummary(NamedTuple):
    n: int
    minimum: float | None
    q1: float | None
    median: float | None
    q3: float | None
    maximum: float | None
    mean: float | None


@dataclass(frozen=True)
class TimeAnalysis:
    buckets: dict[AgreementPattern, TimeSummary]
    excluded_over_threshold: int
    excluded_missing: int
    excluded_no_duration: int


@dataclass(frozen=True)
class BranchScore:
    n: int
    accuracy: float
    point: OperatingPoint


@dataclass(frozen=True)
class AnnotatorReport:
    annotator: str
    multiclass_n: int
    multiclass_accuracy: float
    branches: dict[Branch, BranchScore]


def agreement_pattern(labels: Sequence) -> AgreementPattern:
    """Full / partial / no agreement among exactly three labels."""
    if len(labels) != RATER_COUNT:
        raise ValueError(f"expected {RATER_COUNT} labels, got {len(labels)}")
    distinct = len(set(labels))
    if distinct == 1:
        return AgreementPattern.FULL
    if distinct == RATER_COUNT:
        return AgreementPattern.NONE
    return AgreementPattern.PARTIAL


def _annotations_by_image(
    annotations: Sequence[AnnotationRecord],
) -> dict[str, dict[str, AnnotationRecord]]:
    by_image: dict[str, dict[str, AnnotationRecord]] = {}
    for record in annotations:
        per_image = by_image.setdefault(record.image_id, {})
        if record.annotator_id in per_image:
            raise ValueError(
                f"duplicate annotation for image {record.image_id!r} by {record.annotator_id!r}"
            )
        per_image[record.annotator_id] = record
    return by_image


def _annotator_ids(annotations: Sequence[AnnotationRecord]) -> tuple[str, ...]:
    ids = tuple(sorted({a.annotator_id for a in annotations}))
    if len(ids) != RATER_COUNT:
        raise ValueError(f"expected {RATER_COUNT} annotators, found {len(ids)}")
    return ids


def _references_by_image(records: Sequence[PredictionRecord]) -> dict[str, PredictionRecord]:
    refs: dict[str, PredictionRecord] = {}
    for record in records:
        if record.image_id in refs:
            raise ValueError(f"duplicate image {record.image_id!r} in reference records")
        refs[record.image_id] = record
    return refs


def error_by_agreement(
    records: Sequence[PredictionRecord],
    annotations: Sequence[AnnotationRecord],
    task: Branch | str = Branch.SUGG,
    threshold: float = DEFAULT_THRESHOLD,
    epsilon: float = DEFAULT_EPSILON,
) -> dict[AgreementPattern, ErrorStat]:
    """Model error rate per annotator-agreement bucket.

    Branch tasks restrict to images whose reference label poses the branch
    question and compute agreement on branch-mapped binary labels, so the
    no-agreement bucket exists only for the multi-class task.  Images
    without a full annotation set are excluded (count logged).
    """
    refs = _references_by_image(records)
    by_image = _annotations_by_image(annotations)
    annotators = _annotator_ids(annotations)

    patterns = [AgreementPattern.FULL, AgreementPattern.PARTIAL]
    if task == MULTICLASS:
        patterns.append(AgreementPattern.NONE)
    tallies = {pattern: [0, 0] for pattern in patterns}

    missing = 0
    for image_id, reference in refs.items():
        per_image = by_image.get(image_id, {})
        if any(annotator not in per_image for annotator in annotators):
            missing += 1
            continue
        assigned = [per_image[a].label for a in annotators]
        if task == MULTICLASS:
            pattern = agreement_pattern(assigned)
            error = multiclass_prediction(reference.probs) != reference.label
        elif isinstance(task, Branch):
            truth = branch_truth(reference.label, task)
            if truth is None:
                continue
            score = aggregate(reference.probs, epsilon).score_for(task)
            if score is None:
                continue
            pattern = agreement_pattern([branch_binary(label, task) for label in assigned])
            error = (score >= threshold) != truth
        else:
            raise ValueError(f"unknown task {task_name(task)!r}")
        tallies[pattern][1] += 1
        if error:
            tallies[pattern][0] += 1
    if missing:
        logger.warning("excluded %d images missing annotations", missing)

    return {
        pattern: ErrorStat(e, n, e / n if n else None)
        for pattern, (e, n) in tallies.items()
    }


def annotator_report(
    annotations: Sequence[AnnotationRecord],
    references: Sequence[PredictionRecord],
    annotator: str,
) -> AnnotatorReport:
    """One annotator's per-task accuracy against the reference labels, with
    a branch-level operating point each.

    Branch applicability follows the reference label, exactly as for the
    model; the annotator's own label maps to a branch answer
    unconditionally.
    """
    refs = _references_by_image(references)
    assigned = {
        a.image_id: a.label
        for a in annotations
        if a.annotator_id == annotator and a.image_id in refs
    }
    if not assigned:
        raise ValueError(f"annotator {annotator!r} has no labels overlapping the references")
    image_ids = [image_id for image_id in refs if image_id in assigned]

    multiclass_acc = accuracy(
        [assigned[i] for i in image_ids], [refs[i].label for i in image_ids]
    )

    branches = {}
    for branch in Branch:
        predicted = []
        truths = []
        for image_id in image_ids:
            truth = branch_truth(refs[image_id].label, branch)
            if truth is None:
                continue
            predicted.append(branch_binary(assigned[image_id], branch))
            truths.append(truth)
        if not truths:
            raise ValueError(f"no applicable images for task {branch.value!r}")
        branches[branch] = BranchScore(
            n=len(truths),
            accuracy=accuracy(predicted, truths),
            point=operating_point(predicted, truths),
        )
    return AnnotatorReport(annotator, len(image_ids), multiclass_acc, branches)


def annotator_error_records(
    references: Sequence[PredictionRecord],
    annotations: Sequence[AnnotationRecord],
    annotator: str,
    task: Branch | str = MULTICLASS,
) -> list[ErrorRecord]:
    """Error records where the flag marks annotator/reference disagreement,
    for stratified disagreement tables."""
    refs = _references_by_image(references)
    assigned = {
        a.image_id: a.label
        for a in annotations
        if a.annotator_id == annotator and a.image_id in refs
    }
    out = []
    for image_id, reference in refs.items():
        if image_id not in assigned:
            continue
        if task == MULTICLASS:
            error = assigned[image_id] != reference.label
        elif isinstance(task, Branch):
            truth = branch_truth(reference.label, task)
            if truth is None:
                continue
            error = branch_binary(assigned[image_id], task) != truth
        else:
            raise ValueError(f"unknown task {task_name(task)!r}")
        out.append(
            ErrorRecord(
                image_id=image_id,
                error=error,
                attributes={
                    "view": reference.view,
                    "pcr": reference.pcr,
                    CLASS_ATTRIBUTE: reference.label.token,
                },
            )
        )
    return out


def rating_table(
    references: Sequence[PredictionRecord],
    annotations: Sequence[AnnotationRecord],
    task: Branch | str = MULTICLASS,
) -> np.ndarray:
    """Item x category rating-count matrix for agreement statistics.

    Items are reference images rated by all annotators (others are
    excluded); categories are the four classes, or {negative, positive} for
    a branch task restricted to its applicable reference labels.
    """
    refs = _references_by_image(references)
    by_image = _annotations_by_image(annotations)
    annotators = _annotator_ids(annotations)
    width = 4 if task == MULTICLASS else 2
    rows = []
    for image_id in sorted(refs):
        per_image = by_image.get(image_id, {})
        if any(annotator not in per_image for annotator in annotators):
            continue
        assigned = [per_image[a].label for a in annotators]
        if task == MULTICLASS:
            row = [0, 0, 0, 0]
            for label in assigned:
                row[label] += 1
        elif isinstance(task, Branch):
            if branch_truth(refs[image_id].label, task) is None:
                continue
            row = [0, 0]
            for label in assigned:
                row[int(branch_binary(label, task))] += 1
        else:
            raise ValueError(f"unknown task {task_name(task)!r}")
        rows.append(row)
    if not rows:
        return np.zeros((0, width), dtype=np.int64)
    return np.asarray(rows, dtype=np.int64)


def _summary(values: list[float]) -> TimeSummary:
    if not values:
        return TimeSummary(0, None, None, None, None, None, None)
    data = np.asarray(values, dtype=float)
    q1, median, q3 = np.percentile(data, [25.0, 50.0, 75.0])  # linear interpolation
    return TimeSummary(
        n=len(values),
        minimum=float(data.min()),
        q1=float(q1),
        median=float(median),
        q3=float(q3),
        maximum=float(data.max()),
        mean=float(data.mean()),
    )


def time_by_agreement(
    annotations: Sequence[AnnotationRecord],
    exclusion_threshold: float = 50.0,
) -> TimeAnalysis:
    """Per-image average labelling time summarised by agreement bucket.

    An image's average uses only annotators with a recorded duration;
    images whose average strictly exceeds the threshold, or that miss an
    annotation entirely, are excluded and counted.
    """
    by_image = _annotations_by_image(annotations)
    annotators = _annotator_ids(annotations)
    values: dict[AgreementPattern, list[float]] = {pattern: [] for pattern in AgreementPattern}
    over = missing = no_duration = 0
    for image_id in sorted(by_image):
        per_image = by_image[image_id]
        if any(annotator not in per_image for annotator in annotators):
            missing += 1
            continue
        durations = [
            per_image[a].duration for a in annotators if per_image[a].duration is not None
        ]
        if not durations:
            no_duration += 1
            continue
        average = sum(durations) / len(durations)
        if average > exclusion_threshold:
            over += 1
            continue
        pattern = agreement_pattern([per_image[a].label for a in annotators])
        values[pattern].append(average)
    buckets = {pattern: _summary(values[pattern]) for pattern in AgreementPattern}
    return TimeAnalysis(buckets, over, missing, no_duration)
