"""Built-in reference cohorts.

Each fixture reconstructs a reference error-count table: per-stratum
errors/instances are hit exactly, while the individual probabilities,
margins and identifiers are synthesised deterministically from a fixed
seed.
"""

from __future__ import annotations

import random

from .hierarchy import Branch, ClassLabel, MULTICLASS
from .records import AnnotationRecord, PredictionRecord
from .synth import CohortSpec, StratumSpec, generate

# Suggestive-task errors by acquisition view and RT-PCR status
# (400 test images, 80 errors overall).
VIEW_PCR_ERROR_CELLS = (
    ("PA", "NEG", 4, 22),
    ("PA", "UNK", 8, 70),
    ("PA", "POS", 6, 30),
    ("AP", "NEG", 19, 75),
    ("AP", "UNK", 14, 48),
    ("AP", "POS", 29, 155),
)

# Suggestive-task model errors by reference class and view.
CLASS_VIEW_ERROR_CELLS = (
    (ClassLabel.NORMAL, "PA", 1, 61),
    (ClassLabel.NORMAL, "AP", 7, 39),
    (ClassLabel.CLASSIC, "PA", 1, 12),
    (ClassLabel.CLASSIC, "AP", 6, 89),
    (ClassLabel.INDETERMINATE, "PA", 13, 21),
    (ClassLabel.INDETERMINATE, "AP", 20, 77),
    (ClassLabel.OTHER, "PA", 3, 28),
    (ClassLabel.OTHER, "AP", 29, 73),
)

# Disagreements between the most experienced annotator's labels and the
# reference labels, by class and view.
ANNOTATOR_DISAGREEMENT_CELLS = (
    (ClassLabel.NORMAL, "PA", 1, 61),
    (ClassLabel.NORMAL, "AP", 6, 39),
    (ClassLabel.CLASSIC, "PA", 1, 12),
    (ClassLabel.CLASSIC, "AP", 17, 89),
    (ClassLabel.INDETERMINATE, "PA", 11, 21),
    (ClassLabel.INDETERMINATE, "AP", 34, 77),
    (ClassLabel.OTHER, "PA", 3, 28),
    (ClassLabel.OTHER, "AP", 17, 73),
)

# Multi-class model error counts per annotator-agreement bucket (bucket
# sizes are not published; 1000 items each keeps the published rates exact).
AGREEMENT_ERROR_CELLS = (
    ("full", 303, 1000),
    ("partial", 479, 1000),
    ("none", 561, 1000),
)

ANNOTATORS = ("ann1", "ann2", "ann3")


def view_pcr_error_cohort(seed: int = 2020) -> CohortSpec:
    """Cohort whose suggestive-task error tree has the published view/PCR
    node counts.

    Each (view, pcr) cell is split into a suggestive-positive and a
    -negative stratum, with labels alternating across cells so every class
    (and both truth values of every branch) occurs.
    """
    strata = []
    for index, (view, pcr, errors, instances) in enumerate(VIEW_PCR_ERROR_CELLS):
        pos_label = ClassLabel.CLASSIC if index % 2 == 0 else ClassLabel.INDETERMINATE
        neg_label = ClassLabel.NORMAL if index % 2 == 0 else ClassLabel.OTHER
        n_pos = (instances + 1) // 2
        e_pos = (errors + 1) // 2
        strata.append(StratumSpec({"view": view, "pcr": pcr}, pos_label, n_pos, e_pos))
        strata.append(
            StratumSpec(
                {"view": view, "pcr": pcr}, neg_label, instances - n_pos, errors - e_pos
            )
        )
    return CohortSpec(strata=tuple(strata), seed=seed, task=Branch.SUGG)


def class_view_error_cohort(seed: int = 2021) -> CohortSpec:
    """Cohort reproducing the reference class-by-view error counts for the
    suggestive task (PCR status unrecorded)."""
    strata = tuple(
        StratumSpec({"view": view, "pcr": "UNK"}, label, instances, errors)
        for label, view, errors, instances in CLASS_VIEW_ERROR_CELLS
    )
    return CohortSpec(strata=strata, seed=seed, task=Branch.SUGG)


def _other_label(label: ClassLabel) -> ClassLabel:
    return ClassLabel((label + 1) % 4)


def annotator_disagreement_cohort(
    seed: int = 2022,
) -> tuple[list[PredictionRecord], list[AnnotationRecord]]:
    """Reference records plus one annotator's labels, disagreeing with the
    reference in exactly the published per-stratum counts."""
    strata = tuple(
        StratumSpec({"view": view, "pcr": "UNK"}, label, instances, 0)
        for label, view, _, instances in ANNOTATOR_DISAGREEMENT_CELLS
    )
    records = generate(CohortSpec(strata=strata, seed=seed, task=Branch.SUGG))
    annotations = []
    position = 0
    for label, _, disagreements, instances in ANNOTATOR_DISAGREEMENT_CELLS:
        for i in range(instances):
            record = records[position]
            assigned = _other_label(label) if i < disagreements else label
            annotations.append(AnnotationRecord(record.image_id, ANNOTATORS[0], assigned))
            position += 1
    return records, annotations


def _quarter(total: int, part: int) -> int:
    return total // 4 + (1 if part < total % 4 else 0)


def agreement_error_cohort(
    seed: int = 2023,
) -> tuple[list[PredictionRecord], list[AnnotationRecord]]:
    """Three-annotator cohort whose multi-class model error rate per
    agreement bucket matches the published percentages.

    Buckets spread over all four classes so every branch-level analysis has
    both truth values available.
    """
    strata = []
    for _, errors, instances in AGREEMENT_ERROR_CELLS:
        for part, label in enumerate(ClassLabel):
            strata.append(
                StratumSpec(
                    {"view": "PA", "pcr": "UNK"},
                    label,
                    _quarter(instances, part),
                    _quarter(errors, part),
                )
            )
    records = generate(CohortSpec(strata=tuple(strata), seed=seed, task=MULTICLASS))
    annotations = []
    position = 0
    for bucket, _, instances in AGREEMENT_ERROR_CELLS:
        for _ in range(instances):
            record = records[position]
            label = record.label
            if bucket == "full":
                assigned = (label, label, label)
            elif bucket == "partial":
                assigned = (label, label, _other_label(label))
            else:
                assigned = (label, _other_label(label), _other_label(_other_label(label)))
            for annotator, value in zip(ANNOTATORS, assigned):
                annotations.append(AnnotationRecord(record.image_id, annotator, value))
            position += 1
    return records, annotations


def labelling_time_annotations(
    seed: int = 2024,
    n_images: int = 400,
    n_over_threshold: int = 11,
    n_missing: int = 9,
    threshold: float = 50.0,
) -> list[AnnotationRecord]:
    """Three-annotator timing cohort: a fixed number of images exceed the
    average-time threshold, a further fixed number lack one annotation, and
    the rest mix agreement patterns."""
    rng = random.Random(seed)
    annotations = []
    labels = list(ClassLabel)
    for i in range(n_images):
        image_id = f"img-{i:05d}"
        base = labels[i % 4]
        pattern = i % 3
        if pattern == 0:
            assigned = (base, base, base)
        elif pattern == 1:
            assigned = (base, base, _other_label(base))
        else:
            assigned = (base, _other_label(base), _other_label(_other_label(base)))
        if i < n_over_threshold:
            durations = [threshold + 2.0 + 30.0 * rng.random() for _ in range(3)]
        else:
            durations = [5.0 + (threshold - 10.0 - 5.0) * rng.random() for _ in range(3)]
        keep = 2 if n_over_threshold <= i < n_over_threshold + n_missing else 3
        for annotator, label, duration in list(zip(ANNOTATORS, assigned, durations))[:keep]:
            annotations.append(AnnotationRecord(image_id, annotator, label, duration))
    return annotations
