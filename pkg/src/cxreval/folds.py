"""Patient-grouped, class-stratified K-fold assignment and per-fold
ensembling/aggregation helpers.

A patient's images must never straddle a fold boundary, so folds are dealt
out patient by patient: within each class, patient groups are ordered by
descending image count (seeded shuffle breaking size ties) and dealt
cyclically over a seeded fold permutation.  That keeps each fold's class
counts within one patient-group of perfect proportionality.
"""

from __future__ import annotations

import math
import random
from collections import Counter, defaultdict
from typing import Mapping, NamedTuple, Sequence

from .hierarchy import ClassLabel, ClassProbabilities
from .records import PredictionRecord

FoldAssignment = dict[str, int]


class MeanStd(NamedTuple):
    mean: float
    std: float


def stratified_group_kfold(
    records: Sequence[PredictionRecord], k: int, seed: int = 0
) -> FoldAssignment:
    """Assign every patient to one of k folds, stratifying by the patient's
    modal class label (ties to the lowest class code).

    Deterministic for a fixed (records, k, seed); the seed permutes
    equal-sized patient groups and the fold order.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    images_by_patient: dict[str, list[ClassLabel]] = defaultdict(list)
    for record in records:
        if not record.patient_id:
            raise ValueError(f"record {record.image_id!r} has no patient identifier")
        images_by_patient[record.patient_id].append(record.label)
    if k > len(images_by_patient):
        raise ValueError(f"k={k} exceeds the number of patients ({len(images_by_patient)})")

    patients_by_class: dict[ClassLabel, list[tuple[str, int]]] = defaultdict(list)
    for patient_id in sorted(images_by_patient):
        labels = images_by_patient[patient_id]
        counts = Counter(labels)
        top = max(counts.values())
        modal = min(label for label, c in counts.items() if c == top)
        patients_by_class[modal].append((patient_id, len(labels)))

    rng = random.Random(seed)
    draws = [rng.random() for _ in range(k)]
    fold_order = sorted(range(k), key=draws.__getitem__)
    assignment: FoldAssignment = {}
    position = 0  # runs across classes so overall fold sizes stay balanced
    for label in ClassLabel:
        groups = patients_by_class.get(label)
        if not groups:
            continue
        keyed = [(-size, rng.random(), patient_id) for patient_id, size in groups]
        keyed.sort()
        for _, _, patient_id in keyed:
            assignment[patient_id] = fold_order[position % k]
            position += 1
    return assignment


def ensemble_mean(member_probs: Sequence[ClassProbabilities]) -> ClassProbabilities:
    """Component-wise mean of probability vectors (renormalised against
    rounding drift)."""
    if not member_probs:
        raise ValueError("cannot ensemble an empty member list")
    sums = [0.0, 0.0, 0.0, 0.0]
    for probs in member_probs:
        for i in range(4):
            sums[i] += probs.p[i]
    m = len(member_probs)
    return ClassProbabilities(tuple(s / m for s in sums))


def ensemble_by_image(records: Sequence[PredictionRecord]) -> list[PredictionRecord]:
    """Average multi-fold predictions per image into a single record.

    Identifiers, label and attributes must agree across the members of an
    image; output preserves first-occurrence image order and drops the fold.
    """
    grouped: dict[str, list[PredictionRecord]] = {}
    for record in records:
        grouped.setdefault(record.image_id, []).append(record)
    out = []
    for image_id, members in grouped.items():
        first = members[0]
        for member in members[1:]:
            if (member.patient_id, member.label, member.view, member.pcr) != (
                first.patient_id,
                first.label,
                first.view,
                first.pcr,
            ):
                raise ValueError(f"inconsistent metadata across folds for image {image_id!r}")
        out.append(
            PredictionRecord(
                image_id=image_id,
                patient_id=first.patient_id,
                probs=ensemble_mean([m.probs for m in members]),
                label=first.label,
                view=first.view,
                pcr=first.pcr,
                fold=None,
            )
        )
    return out


def crossval_summarize(
    per_fold_reports: Sequence[Mapping[str, Mapping[str, float]]],
) -> dict[str, dict[str, MeanStd]]:
    """Collapse per-fold task->metric maps into mean and unbiased (K-1)
    standard deviation per entry."""
    if len(per_fold_reports) < 2:
        raise ValueError("need at least 2 fold reports")
    reference = per_fold_reports[0]
    for report in per_fold_reports[1:]:
        if set(report) != set(reference):
            raise ValueError("fold reports disagree on task keys")
        for task in reference:
            if set(report[task]) != set(reference[task]):
                raise ValueError(f"fold reports disagree on metric keys for task {task!r}")
    summary: dict[str, dict[str, MeanStd]] = {}
    for task in reference:
        summary[task] = {}
        for metric in reference[task]:
            values = [report[task][metric] for report in per_fold_reports]
            if min(values) == max(values):
                summary[task][metric] = MeanStd(values[0], 0.0)
                continue
            total = 0.0
            for v in values:
                total += v
            mean = total / len(values)
            ss = 0.0
            for v in values:
                ss += (v - mean) ** 2
            summary[task][metric] = MeanStd(mean, math.sqrt(ss / (len(values) - 1)))
    return summary
