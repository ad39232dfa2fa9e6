"""Binary and multi-class performance metrics and multi-rater agreement.

All floating-point accumulation runs in a fixed, sequential order so every
metric is bit-reproducible for identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .hierarchy import (
    DEFAULT_EPSILON,
    DEFAULT_THRESHOLD,
    Branch,
    aggregate,
    branch_truth,
)
from .records import PredictionRecord


class ScoredSample(NamedTuple):
    score: float
    truth: bool


class OperatingPoint(NamedTuple):
    fpr: float
    tpr: float
    n: int


@dataclass(frozen=True)
class RocCurve:
    """ROC step curve: points run from (0, 0) to (1, 1) with non-decreasing
    FPR and TPR; tied scores collapse into a single sweep step."""

    points: tuple[tuple[float, float], ...]
    auc: float


@dataclass(frozen=True)
class PrCurve:
    """Precision/recall at every distinct score threshold, descending; the
    area is the average precision."""

    points: tuple[tuple[float, float], ...]
    auc: float


@dataclass(frozen=True)
class BranchReport:
    """The per-task metric triple over the applicable records."""

    task: str
    n: int
    accuracy: float
    roc_auc: float
    pr_auc: float


def accuracy(predictions: Sequence, truths: Sequence) -> float:
    """Fraction of exact matches between two equal-length sequences."""
    if len(predictions) != len(truths):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs {len(truths)} truths")
    if not predictions:
        raise ValueError("cannot compute accuracy of empty input")
    matches = 0
    for pred, truth in zip(predictions, truths):
        if pred == truth:
            matches += 1
    return matches / len(predictions)


def _score_blocks(samples: Sequence[ScoredSample]):
    """Sort samples by descending score and collapse tied scores into
    blocks; returns cumulative true/false positive counts at block ends."""
    scores = np.asarray([s.score for s in samples], dtype=float)
    truths = np.asarray([bool(s.truth) for s in samples], dtype=bool)
    if scores.size == 0:
        raise ValueError("no samples")
    if not np.isfinite(scores).all():
        raise ValueError("scores must be finite")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_truths = truths[order]
    block_ends = np.flatnonzero(np.diff(sorted_scores) != 0.0)
    block_ends = np.append(block_ends, sorted_scores.size - 1)
    tp = np.cumsum(sorted_truths.astype(np.int64))[block_ends]
    fp = (block_ends + 1) - tp
    return tp, fp, sorted_scores[block_ends]


def roc_curve(samples: Sequence[ScoredSample]) -> RocCurve:
    """ROC curve with trapezoidal AUC.

    Tied scores are swept in one step, so the AUC equals the Mann-Whitney
    rank statistic with ties credited 0.5.  The area is computed from the
    integer pair counts and divided once, making it exactly the brute-force
    pair-counting value.
    """
    tp, fp, _ = _score_blocks(samples)
    n_pos = int(tp[-1])
    n_neg = int(fp[-1])
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC requires at least one positive and one negative truth")
    numerator2 = 0  # twice the number of correctly ordered pairs, ties count 1
    prev_tp = 0
    prev_fp = 0
    for tp_k, fp_k in zip(tp.tolist(), fp.tolist()):
        numerator2 += (fp_k - prev_fp) * (tp_k + prev_tp)
        prev_tp, prev_fp = tp_k, fp_k
    auc = numerator2 / (2 * n_pos * n_neg)
    points = [(0.0, 0.0)]
    for tp_k, fp_k in zip(tp.tolist(), fp.tolist()):
        points.append((fp_k / n_neg, tp_k / n_pos))
    return RocCurve(tuple(points), auc)


def pr_curve(samples: Sequence[ScoredSample]) -> PrCurve:
    """Precision-recall curve with average-precision area.

    AP = sum over score blocks of (recall increment) * (block precision),
    i.e. the mean of the precision at each positive's threshold.  Step-wise
    averaging is used instead of trapezoidal interpolation, which is known
    to be optimistic for PR curves.
    """
    tp, fp, _ = _score_blocks(samples)
    n_pos = int(tp[-1])
    if n_pos == 0:
        raise ValueError("PR requires at least one positive truth")
    ap_sum = 0.0
    prev_tp = 0
    points = []
    for tp_k, fp_k in zip(tp.tolist(), fp.tolist()):
        precision = tp_k / (tp_k + fp_k)
        recall = tp_k / n_pos
        ap_sum += (tp_k - prev_tp) * precision
        points.append((recall, precision))
        prev_tp = tp_k
    return PrCurve(tuple(points), ap_sum / n_pos)


def fleiss_kappa(table) -> float:
    """Fleiss' kappa over an item x category matrix of rating counts.

                 P-bar - Pe-bar
        kappa = ----------------
                  1 - Pe-bar

    where P-bar is the mean per-item pairwise agreement and Pe-bar the
    chance agreement from the marginal category proportions.  Requires at
    least 2 items, every row summing to the same rater count n >= 2, and a
    non-degenerate margin (not all ratings in a single category).
    """
    counts = np.asarray(table)
    if counts.ndim != 2:
        raise ValueError("rating table must be 2-dimensional")
    if not np.issubdtype(counts.dtype, np.integer):
        as_int = counts.astype(np.int64)
        if not np.array_equal(as_int, counts):
            raise ValueError("rating counts must be integers")
        counts = as_int
    if (counts < 0).any():
        raise ValueError("rating counts must be non-negative")
    n_items = counts.shape[0]
    if n_items < 2:
        raise ValueError("need at least 2 items")
    row_sums = counts.sum(axis=1)
    n_raters = int(row_sums[0])
    if not (row_sums == n_raters).all():
        raise ValueError("every item must be rated by the same number of raters")
    if n_raters < 2:
        raise ValueError("need at least 2 raters")

    total = n_items * n_raters
    if (counts.sum(axis=0) == total).any():
        raise ValueError("degenerate table: all ratings fall in one category")

    p_bar = 0.0
    for row in counts:
        sq = 0
        for c in row.tolist():
            sq += c * c
        p_bar += (sq - n_raters) / (n_raters * (n_raters - 1))
    p_bar /= n_items

    pe_bar = 0.0
    for cat_total in counts.sum(axis=0).tolist():
        proportion = cat_total / total
        pe_bar += proportion * proportion

    if p_bar == 1.0:
        return 1.0
    return (p_bar - pe_bar) / (1.0 - pe_bar)


def operating_point(predicted: Sequence[bool], truths: Sequence[bool]) -> OperatingPoint:
    """Single (FPR, TPR) point of a hard classifier."""
    if len(predicted) != len(truths):
        raise ValueError("length mismatch between predictions and truths")
    tp = fn = fp = tn = 0
    for pred, truth in zip(predicted, truths):
        if truth:
            if pred:
                tp += 1
            else:
                fn += 1
        else:
            if pred:
                fp += 1
            else:
                tn += 1
    if tp + fn == 0 or fp + tn == 0:
        raise ValueError("operating point requires both classes among the truths")
    return OperatingPoint(fp / (fp + tn), tp / (tp + fn), len(truths))


def branch_samples(
    records: Sequence[PredictionRecord],
    branch: Branch,
    epsilon: float = DEFAULT_EPSILON,
) -> list[ScoredSample]:
    """Branch-level scored samples for the applicable records.

    Records whose reference label is outside the branch, or whose branch
    probability is undefined (degenerate denominator), are excluded.
    """
    samples = []
    for record in records:
        truth = branch_truth(record.label, branch)
        if truth is None:
            continue
        score = aggregate(record.probs, epsilon).score_for(branch)
        if score is None:
            continue
        samples.append(ScoredSample(score, truth))
    return samples


def branch_report(
    records: Sequence[PredictionRecord],
    branch: Branch,
    threshold: float = DEFAULT_THRESHOLD,
    epsilon: float = DEFAULT_EPSILON,
) -> BranchReport:
    """Accuracy, ROC-AUC and PR-AUC of the thresholded branch probability
    over the applicable records."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie strictly between 0 and 1")
    samples = branch_samples(records, branch, epsilon)
    if not samples:
        raise ValueError(f"no applicable records for task {branch.value!r}")
    predictions = [s.score >= threshold for s in samples]
    truths = [s.truth for s in samples]
    return BranchReport(
        task=branch.value,
        n=len(samples),
        accuracy=accuracy(predictions, truths),
        roc_auc=roc_curve(samples).auc,
        pr_auc=pr_curve(samples).auc,
    )
