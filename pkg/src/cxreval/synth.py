"""Deterministic synthetic cohorts.

Builds prediction datasets hitting exact per-stratum error counts for a
designated task, plus randomized cohorts with planted attribute-conditional
error rates for property tests.  All randomness flows from Python's
Mersenne Twister (``random.Random``) seeded per cohort, using only its
``random()`` method, so output is stable across platforms and versions.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Mapping

from .erroranalysis import AttributeSchema, ErrorRecord, builtin_schema
from .hierarchy import (
    Branch,
    ClassLabel,
    ClassProbabilities,
    MULTICLASS,
    branch_truth,
    task_name,
)
from .records import PredictionRecord


@dataclass(frozen=True)
class StratumSpec:
    """One stratum: fixed attribute values, class label and exact
    error/instance counts."""

    attributes: Mapping[str, str]
    label: ClassLabel
    instances: int
    errors: int

    def __post_init__(self):
        if self.instances < 0 or not 0 <= self.errors <= self.instances:
            raise ValueError(
                f"infeasible stratum: {self.errors} errors of {self.instances} instances"
            )


@dataclass(frozen=True)
class CohortSpec:
    """A full cohort: schema, strata, the task whose errors are planted and
    the generator seed."""

    strata: tuple[StratumSpec, ...]
    seed: int
    task: Branch | str = Branch.SUGG
    schema: AttributeSchema = field(default_factory=builtin_schema)

    def __post_init__(self):
        if not isinstance(self.task, Branch) and self.task != MULTICLASS:
            raise ValueError(f"unknown task {task_name(self.task)!r}")
        for stratum in self.strata:
            for name, values in self.schema.attributes:
                value = stratum.attributes.get(name)
                if value is None:
                    raise ValueError(f"stratum is missing attribute {name!r}")
                if value not in values:
                    raise ValueError(f"unknown value {value!r} for attribute {name!r}")
            if isinstance(self.task, Branch) and branch_truth(stratum.label, self.task) is None:
                raise ValueError(
                    f"label {stratum.label.token} is outside task {task_name(self.task)!r}"
                )


# Dominant-class mass keeps the relevant branch ratio and the argmax on the
# intended side of 0.5 no matter how the remainder is split.
_DOMINANT_LOW = 0.55
_DOMINANT_SPAN = 0.4


def _pick_dominant(rng: random.Random, label: ClassLabel, task: Branch | str, correct: bool) -> ClassLabel:
    if task == MULTICLASS:
        if correct:
            return label
        others = [c for c in ClassLabel if c != label]
        return others[int(rng.random() * 3.0) % 3]
    truth = branch_truth(label, task)
    side = truth if correct else not truth
    if task is Branch.SUGG:
        pool = (ClassLabel.CLASSIC, ClassLabel.INDETERMINATE) if side else (ClassLabel.NORMAL, ClassLabel.OTHER)
        if label in pool:
            return label
        return pool[0] if rng.random() < 0.5 else pool[1]
    if task is Branch.CLASSIC_VS_INDET:
        return ClassLabel.CLASSIC if side else ClassLabel.INDETERMINATE
    return ClassLabel.OTHER if side else ClassLabel.NORMAL


def _synth_probs(rng: random.Random, dominant: ClassLabel) -> ClassProbabilities:
    p_dom = _DOMINANT_LOW + _DOMINANT_SPAN * rng.random()
    weights = {c: rng.random() for c in ClassLabel if c != dominant}
    total = sum(weights.values())
    remainder = 1.0 - p_dom
    probs = [0.0, 0.0, 0.0, 0.0]
    probs[dominant] = p_dom
    for c, w in weights.items():
        probs[c] = remainder * (w / total) if total > 0.0 else remainder / 3.0
    return ClassProbabilities(tuple(probs))


def generate(spec: CohortSpec) -> list[PredictionRecord]:
    """Materialise the cohort: per stratum, exactly ``errors`` records are
    model-incorrect for the designated task at the 0.5 operating point.

    Every record gets its own patient; output is a pure function of the
    spec.
    """
    rng = random.Random(spec.seed)
    records = []
    counter = 0
    for stratum in spec.strata:
        for i in range(stratum.instances):
            correct = i >= stratum.errors
            dominant = _pick_dominant(rng, stratum.label, spec.task, correct)
            records.append(
                PredictionRecord(
                    image_id=f"img-{counter:05d}",
                    patient_id=f"pat-{counter:05d}",
                    probs=_synth_probs(rng, dominant),
                    label=stratum.label,
                    view=stratum.attributes["view"],
                    pcr=stratum.attributes["pcr"],
                )
            )
            counter += 1
    return records


def generate_planted(
    schema: AttributeSchema,
    n: int,
    planted_attr: str,
    rates: Mapping[str, float],
    seed: int,
) -> list[ErrorRecord]:
    """Random cohort with iid uniform attributes where the error flag is
    Bernoulli with the planted attribute's value-specific rate."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if planted_attr not in schema.names:
        raise ValueError(f"unknown planted attribute {planted_attr!r}")
    planted_values = schema.values_for(planted_attr)
    for value in planted_values:
        rate = rates.get(value)
        if rate is None:
            raise ValueError(f"no rate given for value {value!r}")
        if not 0.0 <= rate <= 1.0:
            raise ValueError(f"rate for {value!r} outside [0, 1]")
    rng = random.Random(seed)
    records = []
    for i in range(n):
        attributes = {}
        for name, values in schema.attributes:
            attributes[name] = values[int(rng.random() * len(values)) % len(values)]
        error = rng.random() < rates[attributes[planted_attr]]
        records.append(ErrorRecord(image_id=f"rec-{i:05d}", error=error, attributes=attributes))
    return records
