"""JSON and CSV writers for evaluation artifacts."""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path
from typing import Sequence

from .evaluate import Evaluation
from .roc import RocCurve


def write_metrics_json(path: str | os.PathLike, evaluation: Evaluation, class_names: Sequence[str]) -> None:
    m = evaluation.metrics
    doc = {
        "metrics": m.as_dict(),
        "macro_auc": evaluation.roc.macro_auc,
        "auc": {class_names[c]: r.auc for c, r in evaluation.roc.per_class.items()},
        "roc_skipped": [class_names[c] for c in evaluation.roc.skipped],
        "tallies": {
            name: {"tp": t.tp, "fp": t.fp, "tn": t.tn, "fn": t.fn} for name, t in zip(class_names, m.tallies)
        },
        "confusion_matrix": evaluation.confusion.counts.tolist(),
        "zero_support_rows": [class_names[i] for i in evaluation.zero_support],
        "samples": evaluation.confusion.total,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def write_metrics_csv(path: str | os.PathLike, evaluation: Evaluation) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for name, value in evaluation.metrics.as_dict().items():
            writer.writerow([name, repr(value)])
        writer.writerow(["macro_auc", repr(evaluation.roc.macro_auc)])


def write_confusion_csv(path: str | os.PathLike, evaluation: Evaluation, class_names: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["actual\\predicted", *class_names])
        for name, row in zip(class_names, evaluation.confusion.counts.tolist()):
            writer.writerow([name, *row])


def write_roc_csv(path: str | os.PathLike, roc: RocCurve, class_names: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "threshold", "fpr", "tpr", "auc"])
        for c, curve in roc.per_class.items():
            for thr, fpr, tpr in zip(curve.thresholds, curve.fpr, curve.tpr):
                writer.writerow([class_names[c], repr(float(thr)), repr(float(fpr)), repr(float(tpr)), repr(curve.auc)])
