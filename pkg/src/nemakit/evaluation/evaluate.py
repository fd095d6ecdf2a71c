"""Run a model over a labelled split and collect every evaluation artifact."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..engine import ops
from ..engine.tensor import Tensor, no_grad
from .metrics import ConfusionMatrix, MetricsReport, confusion_matrix, metrics_from_cm
from .roc import RocCurve, roc_auc


@dataclass
class Evaluation:
    metrics: MetricsReport
    confusion: ConfusionMatrix
    normalized: np.ndarray
    zero_support: list[int]
    roc: RocCurve
    probabilities: np.ndarray
    predictions: np.ndarray


def predict_logits(model, x: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Eval-mode logits for ``x``; restores the model's previous mode afterwards."""
    was_training = model.training
    model.eval()
    try:
        with no_grad():
            chunks = [model(Tensor(x[i : i + batch_size])).data for i in range(0, len(x), batch_size)]
    finally:
        model.train(was_training)
    return np.concatenate(chunks, axis=0)


def evaluate_model(model, x: np.ndarray, y, batch_size: int = 64, n_classes: int | None = None) -> Evaluation:
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if len(x) == 0:
        raise ValueError("cannot evaluate an empty split")
    if len(x) != len(y):
        raise ValueError(f"{len(x)} images but {len(y)} labels")
    logits = predict_logits(model, x, batch_size).astype(np.float64)
    k = logits.shape[1] if n_classes is None else n_classes
    loss = float(ops.softmax_cross_entropy(Tensor(logits, dtype=np.float64), y).item())
    probs = ops.softmax(logits)
    predictions = logits.argmax(axis=1)
    cm = confusion_matrix(y, predictions, k)
    metrics = metrics_from_cm(cm)
    metrics.loss = loss
    normalized, empty = cm.normalized()
    return Evaluation(metrics, cm, normalized, empty, roc_auc(probs, y, k), probs, predictions)
