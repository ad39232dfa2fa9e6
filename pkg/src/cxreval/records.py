"""Record types shared across the evaluation pipeline."""

from __future__ import annotations

from dataclasses import dataclass

from .hierarchy import ClassLabel, ClassProbabilities

VIEW_VALUES = ("PA", "AP")
PCR_VALUES = ("POS", "NEG", "UNK")


@dataclass(frozen=True)
class PredictionRecord:
    """One image's identifiers, acquisition attributes, reference label and
    model class probabilities."""

    image_id: str
    patient_id: str
    probs: ClassProbabilities
    label: ClassLabel
    view: str
    pcr: str
    fold: int | None = None

    def __post_init__(self):
        if self.view not in VIEW_VALUES:
            raise ValueError(f"unknown view {self.view!r} (expected one of {VIEW_VALUES})")
        if self.pcr not in PCR_VALUES:
            raise ValueError(f"unknown pcr status {self.pcr!r} (expected one of {PCR_VALUES})")


@dataclass(frozen=True)
class AnnotationRecord:
    """One (image, annotator) pair: the assigned label and, when recorded,
    the labelling duration in seconds."""

    image_id: str
    annotator_id: str
    label: ClassLabel
    duration: float | None = None

    def __post_init__(self):
        if self.duration is not None and not self.duration > 0.0:
            raise ValueError("duration, when present, must be positive")
