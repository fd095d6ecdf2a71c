"""Confusion matrices, micro-averaged metrics, ROC-AUC and report emitters."""

from .evaluate import Evaluation, evaluate_model, predict_logits
from .metrics import (
    METRIC_NAMES,
    ClassTally,
    ConfusionMatrix,
    MetricsReport,
    aggregate_folds,
    confusion_matrix,
    metrics_from_cm,
    tallies_from_cm,
)
from .roc import ClassRoc, RocCurve, binary_roc, roc_auc

__all__ = [
    "METRIC_NAMES",
    "ClassRoc",
    "ClassTally",
    "ConfusionMatrix",
    "Evaluation",
    "MetricsReport",
    "RocCurve",
    "aggregate_folds",
    "binary_roc",
    "confusion_matrix",
    "evaluate_model",
    "metrics_from_cm",
    "predict_logits",
    "roc_auc",
    "tallies_from_cm",
]

from . import svg  # noqa: E402
