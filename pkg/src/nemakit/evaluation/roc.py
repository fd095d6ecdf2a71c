"""One-vs-rest ROC curves with tie-aware threshold sweeps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ClassRoc:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray  # thresholds[0] is +inf
    auc: float


@dataclass
class RocCurve:
    per_class: dict[int, ClassRoc]
    skipped: list[int]

    @property
    def macro_auc(self) -> float:
        if not self.per_class:
            return float("nan")
        return float(np.mean([c.auc for c in self.per_class.values()]))


def binary_roc(scores: np.ndarray, positive: np.ndarray) -> ClassRoc:
    """ROC of ``scores`` for the boolean ``positive`` mask.

    Every distinct score is a threshold; samples sharing a score enter the
    curve together, which makes the trapezoid over a tie group count half of
    the tied positive/negative pairs.
    """
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    pos = positive[order].astype(np.int64)
    group_end = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tps = np.cumsum(pos)[group_end]
    fps = (group_end + 1) - tps
    p, n = int(pos.sum()), len(pos) - int(pos.sum())
    tpr = np.r_[0.0, tps / p]
    fpr = np.r_[0.0, fps / n]
    auc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1])) / 2)
    return ClassRoc(fpr, tpr, np.r_[np.inf, s[group_end]], auc)


def roc_auc(scores: np.ndarray, actual, n_classes: int | None = None) -> RocCurve:
    """Per-class ROC over the columns of ``scores`` (N, K); classes lacking positives or negatives are skipped."""
    scores = np.asarray(scores, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.int64).reshape(-1)
    if scores.ndim != 2 or scores.shape[0] != actual.size:
        raise ValueError(f"scores {scores.shape} do not align with {actual.size} labels")
    if not np.isfinite(scores).all():
        raise ValueError("scores contain non-finite values")
    k = scores.shape[1] if n_classes is None else n_classes
    per_class, skipped = {}, []
    for c in range(k):
        positive = actual == c
        if positive.all() or not positive.any():
            skipped.append(c)
            continue
        per_class[c] = binary_roc(scores[:, c], positive)
    return RocCurve(per_class, skipped)
