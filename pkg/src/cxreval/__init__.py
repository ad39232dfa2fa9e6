"""Evaluation toolkit for four-class chest X-ray triage predictions.

Interprets multi-class probabilities through the clinical decision
branches, computes branch-wise and multi-class metrics plus multi-rater
agreement, performs decision-tree failure-mode analysis over acquisition
attributes, and handles patient-grouped cross-validation splits.
"""

__version__ = "0.1.0"

from .hierarchy import (
    Branch,
    BranchProbabilities,
    ClassLabel,
    ClassProbabilities,
    MULTICLASS,
    aggregate,
    branch_binary,
    branch_prediction,
    branch_truth,
    multiclass_prediction,
    reconstruct,
)
from .records import AnnotationRecord, PredictionRecord

__all__ = [
    "AnnotationRecord",
    "Branch",
    "BranchProbabilities",
    "ClassLabel",
    "ClassProbabilities",
    "MULTICLASS",
    "PredictionRecord",
    "aggregate",
    "branch_binary",
    "branch_prediction",
    "branch_truth",
    "multiclass_prediction",
    "reconstruct",
    "__version__",
]
