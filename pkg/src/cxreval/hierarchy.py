"""Four-class triage domain model and the hierarchical branch view of it.

A model emits one probability per reporting category (normal / classic /
indeterminate / other abnormality).  Radiologists, however, reason through
three binary decisions: is anything suggestive present, classic vs
indeterminate among suggestive images, and other abnormality vs normal among
the rest.  This module maps class probabilities and class labels onto those
branches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum

DEFAULT_EPSILON = 1e-12
DEFAULT_THRESHOLD = 0.5

# Sum drift up to this is silently kept (already normalised to float
# precision; dividing again would break serialisation round trips).
_EXACT_SUM_DRIFT = 1e-14
# Sum drift up to this is corrected by dividing by the sum; beyond it the
# vector is rejected as corrupt.
PROB_SUM_TOLERANCE = 1e-9


class ClassLabel(IntEnum):
    """The four reporting categories, with stable codes 0..3."""

    NORMAL = 0
    CLASSIC = 1
    INDETERMINATE = 2
    OTHER = 3

    @property
    def token(self) -> str:
        """Canonical file token; INDETERMINATE abbreviates to INDET."""
        return "INDET" if self is ClassLabel.INDETERMINATE else self.name

    @classmethod
    def parse(cls, text: str) -> "ClassLabel":
        """Parse a label token, case-insensitively."""
        token = text.strip().upper()
        if token == "INDET":
            return cls.INDETERMINATE
        try:
            return cls[token]
        except KeyError:
            valid = ", ".join(label.token for label in cls)
            raise ValueError(f"unknown class label {text!r} (expected one of {valid})") from None


class Branch(Enum):
    """The three binary decisions of the clinical triage tree."""

    SUGG = "sugg"
    CLASSIC_VS_INDET = "classic-vs-indet"
    OTHER_VS_NORMAL = "other-vs-normal"

    @property
    def tag(self) -> str:
        """Single-letter tag (A/B/C) in top-down decision order."""
        return {"sugg": "A", "classic-vs-indet": "B", "other-vs-normal": "C"}[self.value]


MULTICLASS = "multiclass"

# Labels counting as a positive answer for each branch.
_POSITIVE = {
    Branch.SUGG: frozenset({ClassLabel.CLASSIC, ClassLabel.INDETERMINATE}),
    Branch.CLASSIC_VS_INDET: frozenset({ClassLabel.CLASSIC}),
    Branch.OTHER_VS_NORMAL: frozenset({ClassLabel.OTHER}),
}

# Labels for which the branch question is posed at all.
_APPLICABLE = {
    Branch.SUGG: frozenset(ClassLabel),
    Branch.CLASSIC_VS_INDET: frozenset({ClassLabel.CLASSIC, ClassLabel.INDETERMINATE}),
    Branch.OTHER_VS_NORMAL: frozenset({ClassLabel.NORMAL, ClassLabel.OTHER}),
}


def parse_task(text: str) -> Branch | str:
    """Parse a task token: a branch value or "multiclass"."""
    token = text.strip().lower()
    if token == MULTICLASS:
        return MULTICLASS
    for branch in Branch:
        if token == branch.value:
            return branch
    valid = ", ".join([b.value for b in Branch] + [MULTICLASS])
    raise ValueError(f"unknown task {text!r} (expected one of {valid})")


def task_name(task: Branch | str) -> str:
    return task.value if isinstance(task, Branch) else str(task)


@dataclass(frozen=True)
class ClassProbabilities:
    """A probability vector over the four classes, indexed by ClassLabel.

    Components must each lie in [0, 1] and sum to 1 within 1e-9; vectors off
    by more than float noise are renormalised on construction, larger
    deviations are rejected.
    """

    p: tuple[float, float, float, float]

    def __post_init__(self):
        values = tuple(float(x) for x in self.p)
        if len(values) != 4:
            raise ValueError(f"expected 4 probabilities, got {len(values)}")
        for x in values:
            if not math.isfinite(x) or x < 0.0 or x > 1.0:
                raise ValueError(f"probability {x!r} outside [0, 1]")
        total = values[0] + values[1] + values[2] + values[3]
        if abs(total - 1.0) > PROB_SUM_TOLERANCE:
            raise ValueError(f"probabilities sum to {total!r}, expected 1 within {PROB_SUM_TOLERANCE}")
        if abs(total - 1.0) > _EXACT_SUM_DRIFT:
            values = tuple(x / total for x in values)
        object.__setattr__(self, "p", values)

    def __getitem__(self, label: ClassLabel) -> float:
        return self.p[label]


@dataclass(frozen=True)
class BranchProbabilities:
    """Aggregated branch probabilities; a conditional is None when its
    denominator fell below epsilon."""

    p_sugg: float
    p_classic_given_sugg: float | None
    p_other_given_not_sugg: float | None

    def score_for(self, branch: Branch) -> float | None:
        if branch is Branch.SUGG:
            return self.p_sugg
        if branch is Branch.CLASSIC_VS_INDET:
            return self.p_classic_given_sugg
        return self.p_other_given_not_sugg


def aggregate(probs: ClassProbabilities, epsilon: float = DEFAULT_EPSILON) -> BranchProbabilities:
    """Collapse the four class probabilities into the three branch
    probabilities.

    The suggestive probability is the classic + indeterminate mass; the two
    conditionals divide by that mass (or its complement) and are reported as
    absent rather than clamped when the denominator is below ``epsilon``.
    """
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    p_sugg = probs[ClassLabel.CLASSIC] + probs[ClassLabel.INDETERMINATE]
    p_not_sugg = 1.0 - p_sugg
    p_classic = probs[ClassLabel.CLASSIC] / p_sugg if p_sugg >= epsilon else None
    p_other = probs[ClassLabel.OTHER] / p_not_sugg if p_not_sugg >= epsilon else None
    return BranchProbabilities(p_sugg, p_classic, p_other)


def reconstruct(bp: BranchProbabilities) -> ClassProbabilities:
    """Invert the branch aggregation back to a four-class vector.

    Requires both conditionals; the normal-class mass is the remainder so the
    output sums to 1.
    """
    if bp.p_classic_given_sugg is None or bp.p_other_given_not_sugg is None:
        raise ValueError("cannot reconstruct: a conditional probability is absent")
    p_classic = bp.p_sugg * bp.p_classic_given_sugg
    p_indet = bp.p_sugg * (1.0 - bp.p_classic_given_sugg)
    p_other = (1.0 - bp.p_sugg) * bp.p_other_given_not_sugg
    p_normal = 1.0 - p_classic - p_indet - p_other
    if p_normal < 0.0:
        p_normal = 0.0
    return ClassProbabilities((p_normal, p_classic, p_indet, p_other))


def branch_binary(label: ClassLabel, branch: Branch) -> bool:
    """Map any class label to a branch-level yes/no answer."""
    return label in _POSITIVE[branch]


def branch_truth(label: ClassLabel, branch: Branch) -> bool | None:
    """Branch-level truth of a reference label, or None when the branch
    question does not apply to that label."""
    if label not in _APPLICABLE[branch]:
        return None
    return branch_binary(label, branch)


def branch_prediction(
    bp: BranchProbabilities, branch: Branch, threshold: float = DEFAULT_THRESHOLD
) -> bool | None:
    """Threshold a branch probability into a decision (>= threshold is
    positive); absent conditionals propagate as None."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie strictly between 0 and 1")
    score = bp.score_for(branch)
    if score is None:
        return None
    return score >= threshold


def multiclass_prediction(probs: ClassProbabilities) -> ClassLabel:
    """Argmax class; ties resolve to the lowest class code."""
    best = ClassLabel.NORMAL
    for label in ClassLabel:
        if probs[label] > probs[best]:
            best = label
    return best
