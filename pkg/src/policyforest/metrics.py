"""Confusion-based metrics: balanced accuracy, operating point, ROC/AUC.

Decision rule throughout: predict positive iff score >= threshold.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np


class MetricsError(ValueError):
    """Raised for degenerate inputs (single-class labels, length mismatch)."""


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def sensitivity(self) -> float:
        if self.tp + self.fn == 0:
            raise MetricsError("sensitivity undefined: no positive labels")
        return self.tp / (self.tp + self.fn)

    @property
    def specificity(self) -> float:
        if self.tn + self.fp == 0:
            raise MetricsError("specificity undefined: no negative labels")
        return self.tn / (self.tn + self.fp)


@dataclass(frozen=True)
class OperatingPoint:
    threshold: float
    train_balanced_accuracy: float


@dataclass(frozen=True)
class RocCurve:
    """ROC points (fpr, tpr) from (0,0) to (1,1), both coordinates
    non-decreasing."""

    points: tuple[tuple[float, float], ...]

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("fpr,tpr\n")
        for fpr, tpr in self.points:
            out.write(f"{fpr!r},{tpr!r}\n")
        return out.getvalue()


def _check_pair(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise MetricsError(f"scores and labels must be equal-length vectors, "
                           f"got shapes {scores.shape} and {labels.shape}")
    if scores.size == 0:
        raise MetricsError("empty score vector")
    return scores, labels


def confusion_at_threshold(scores, labels, threshold: float) -> ConfusionCounts:
    """Count prediction outcomes with the score >= threshold rule."""
    scores, labels = _check_pair(scores, labels)
    pred = scores >= threshold
    return ConfusionCounts(
        tp=int(np.sum(pred & (labels == 1))),
        fp=int(np.sum(pred & (labels == 0))),
        tn=int(np.sum(~pred & (labels == 0))),
        fn=int(np.sum(~pred & (labels == 1))),
    )


def balanced_accuracy(c: ConfusionCounts) -> float:
    """(sensitivity + specificity) / 2; chance baseline is 0.5."""
    return 0.5 * (c.sensitivity + c.specificity)


def _threshold_candidates(scores: np.ndarray) -> np.ndarray:
    """Midpoints between consecutive distinct scores, plus sentinels below
    the minimum and above the maximum. Covers every achievable confusion
    table under the >= rule."""
    distinct = np.unique(scores)
    mids = 0.5 * (distinct[:-1] + distinct[1:])
    return np.concatenate(([distinct[0] - 1.0], mids, [distinct[-1] + 1.0]))


def select_operating_point(train_scores, train_labels) -> OperatingPoint:
    """Threshold maximizing training balanced accuracy.

    Ties break toward the smallest qualifying threshold.
    """
    scores, labels = _check_pair(train_scores, train_labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricsError("operating point requires both classes in "
                           "training labels")
    best_t = None
    best_ba = -1.0
    for t in _threshold_candidates(scores):
        ba = balanced_accuracy(confusion_at_threshold(scores, labels, t))
        if ba > best_ba:
            best_ba = ba
            best_t = float(t)
    return OperatingPoint(threshold=best_t, train_balanced_accuracy=best_ba)


def roc_and_auc(scores, labels) -> tuple[RocCurve, float]:
    """ROC curve over distinct-score thresholds and its trapezoidal AUC.

    Tied scores advance tpr and fpr jointly, so the trapezoidal area
    equals the Mann-Whitney statistic P(s_pos > s_neg) + 0.5 P(equal).
    """
    scores, labels = _check_pair(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricsError("ROC requires both classes present")

    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    l = labels[order]
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    n = s.size
    while i < n:
        j = i
        while j < n and s[j] == s[i]:
            tp += int(l[j] == 1)
            fp += int(l[j] == 0)
            j += 1
        points.append((fp / n_neg, tp / n_pos))
        i = j
    curve = RocCurve(tuple(points))
    pts = np.asarray(points)
    auc = float(np.trapezoid(pts[:, 1], pts[:, 0]))
    return curve, auc
