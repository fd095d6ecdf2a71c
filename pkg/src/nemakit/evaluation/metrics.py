"""Confusion matrices and the micro-averaged classification metrics.

Tallies are kept as Python ints and ratios as :class:`fractions.Fraction`
until the final conversion, so identities such as micro precision ==
micro recall hold exactly rather than to rounding.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

METRIC_NAMES = ("loss", "accuracy", "precision", "recall", "specificity", "f1")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are the actual class, columns the predicted class."""

    counts: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def normalized(self) -> tuple[np.ndarray, list[int]]:
        """Row-normalized matrix and the indices of rows with no samples (left as zeros)."""
        rows = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        empty = [int(i) for i in np.flatnonzero(rows[:, 0] == 0)]
        out = np.divide(self.counts, rows, out=np.zeros(self.counts.shape), where=rows > 0)
        return out, empty


def confusion_matrix(actual: Sequence[int], predicted: Sequence[int], n_classes: int) -> ConfusionMatrix:
    actual = np.asarray(actual, dtype=np.int64).reshape(-1)
    predicted = np.asarray(predicted, dtype=np.int64).reshape(-1)
    if actual.shape != predicted.shape:
        raise ValueError(f"{actual.size} actual labels but {predicted.size} predictions")
    for name, labels in (("actual", actual), ("predicted", predicted)):
        bad = np.flatnonzero((labels < 0) | (labels >= n_classes))
        if bad.size:
            raise ValueError(f"{name} label {labels[bad[0]]} at index {bad[0]} outside [0, {n_classes})")
    counts = np.bincount(actual * n_classes + predicted, minlength=n_classes * n_classes)
    return ConfusionMatrix(counts.reshape(n_classes, n_classes).astype(np.int64))


@dataclass(frozen=True)
class ClassTally:
    tp: int
    fp: int
    tn: int
    fn: int


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    specificity: float
    f1: float
    binary_accuracy_macro: float
    precision_macro: float
    recall_macro: float
    tallies: list[ClassTally]
    exact: dict[str, Fraction] = field(default_factory=dict, repr=False)
    loss: float | None = None

    def as_dict(self) -> dict[str, float]:
        out = {name: getattr(self, name) for name in METRIC_NAMES if getattr(self, name) is not None}
        out.update(
            binary_accuracy_macro=self.binary_accuracy_macro,
            precision_macro=self.precision_macro,
            recall_macro=self.recall_macro,
        )
        return out


def _ratio(num: int, den: int) -> Fraction:
    return Fraction(num, den) if den else Fraction(0)


def tallies_from_cm(cm: ConfusionMatrix) -> list[ClassTally]:
    counts = [[int(v) for v in row] for row in cm.counts]
    total = sum(map(sum, counts))
    out = []
    for i in range(len(counts)):
        tp = counts[i][i]
        fp = sum(row[i] for row in counts) - tp
        fn = sum(counts[i]) - tp
        out.append(ClassTally(tp, fp, total - tp - fp - fn, fn))
    return out


def metrics_from_cm(cm: ConfusionMatrix) -> MetricsReport:
    if cm.total == 0:
        raise ValueError("confusion matrix is all zeros")
    t = tallies_from_cm(cm)
    tp, fp, tn, fn = (sum(getattr(c, f) for c in t) for f in ("tp", "fp", "tn", "fn"))
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    specificity = _ratio(tn, tn + fp)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else Fraction(0)
    accuracy = Fraction(tp, cm.total)
    k = len(t)
    binary_acc = sum(_ratio(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn) for c in t) / k
    precision_macro = sum(_ratio(c.tp, c.tp + c.fp) for c in t) / k
    recall_macro = sum(_ratio(c.tp, c.tp + c.fn) for c in t) / k
    exact = dict(
        accuracy=accuracy, precision=precision, recall=recall, specificity=specificity, f1=f1,
        binary_accuracy_macro=binary_acc, precision_macro=precision_macro, recall_macro=recall_macro,
    )
    return MetricsReport(**{name: float(v) for name, v in exact.items()}, tallies=t, exact=exact)


def aggregate_folds(reports: Iterable[MetricsReport | Mapping[str, float]]) -> dict[str, tuple[float, float]]:
    """Per-metric (mean, population standard deviation) over fold reports."""
    rows = [r.as_dict() if isinstance(r, MetricsReport) else dict(r) for r in reports]
    if not rows:
        raise ValueError("no fold reports to aggregate")
    names = [n for n in rows[0] if all(n in r and r[n] is not None for r in rows)]
    return {n: (statistics.fmean(r[n] for r in rows), statistics.pstdev([r[n] for r in rows])) for n in names}
