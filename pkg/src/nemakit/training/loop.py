"""Fold training, k-fold cross-validation and partial weight transfer."""

from __future__ import annotations

import csv
import functools
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from ..engine import ops
from ..engine.tensor import Tensor
from ..evaluation import Evaluation, aggregate_folds, evaluate_model, predict_logits
from ..models import build_model, load_weights, save_weights
from ..models.graph import LayerGraph
from .augment import augment_batch
from .config import TrainConfig
from .folds import FoldPlan, make_folds, make_holdout
from .optim import SGD, clr_triangular

log = logging.getLogger(__name__)

ModelBuilder = Callable[[], LayerGraph]


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    weight_decay: float


@dataclass
class TrainHistory:
    """Per-epoch curves plus per-iteration learning rate and loss traces.

    Epochs are numbered from 1; ``best_epoch == 0`` means no epoch beat the
    initial weights.
    """

    initial_val_loss: float
    initial_val_acc: float
    epochs: list[EpochRecord] = field(default_factory=list)
    lr_trace: list[float] = field(default_factory=list)
    loss_trace: list[float] = field(default_factory=list)
    best_epoch: int = 0
    best_val_acc: float = 0.0

    HEADER = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc", "weight_decay")

    def columns(self) -> dict[str, list[float]]:
        return {name: [getattr(r, name) for r in self.epochs] for name in self.HEADER}

    def write_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.HEADER)
            for r in self.epochs:
                writer.writerow([r.epoch, *(repr(getattr(r, n)) for n in self.HEADER[1:])])

    def write_trace_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "lr", "loss"])
            for i, (lr, loss) in enumerate(zip(self.lr_trace, self.loss_trace)):
                writer.writerow([i, repr(lr), repr(loss)])

    @classmethod
    def read_csv(cls, path: str | os.PathLike) -> dict[str, list[float]]:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return {name: [float(r[name]) for r in rows] for name in cls.HEADER}


@dataclass
class FoldData:
    x_train: np.ndarray
    y_train: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray


@dataclass
class FoldResult:
    history: TrainHistory
    model: LayerGraph  # holds the best weights on return
    transfer: Optional["TransferReport"] = None


@dataclass(frozen=True)
class TransferReport:
    initialized: list[str]
    kept_random: list[str]


def transfer_init(model: LayerGraph, checkpoint: str | os.PathLike) -> TransferReport:
    """Load every parameter the checkpoint shares with ``model`` by name; keep the rest."""
    kept = load_weights(model, checkpoint, partial=True)
    names = [name for name, _ in model.named_parameters()]
    if len(kept) == len(names):
        raise TrainingError(f"{checkpoint}: no parameter names match model {model.name!r}; wrong checkpoint?")
    kept_set = set(kept)
    return TransferReport([n for n in names if n not in kept_set], kept)


def model_builder_for(config: TrainConfig, num_classes: int) -> ModelBuilder:
    """A picklable zero-argument builder for the configured architecture."""
    return functools.partial(
        build_model, config.model, num_classes, config.input_size,
        width_divisor=config.width_divisor, seed=config.seed,
        bn={"momentum": config.bn_momentum, "epsilon": config.bn_epsilon},
    )


def _val_metrics(model: LayerGraph, x: np.ndarray, y: np.ndarray, batch_size: int) -> tuple[float, float]:
    logits = predict_logits(model, x, batch_size).astype(np.float64)
    loss = float(ops.softmax_cross_entropy(Tensor(logits, dtype=np.float64), y).item())
    return loss, float(np.mean(logits.argmax(axis=1) == y))


def train_fold(
    model_builder: ModelBuilder,
    data: FoldData,
    config: TrainConfig,
    fold: int = 0,
    checkpoint_path: str | os.PathLike | None = None,
    transfer: str | os.PathLike | None = None,
) -> FoldResult:
    model = model_builder()
    report = transfer_init(model, transfer) if transfer is not None else None
    model.train()
    optimizer = SGD(model.named_parameters(), config.momentum)

    n = len(data.x_train)
    if n == 0:
        raise TrainingError(f"fold {fold}: empty training split")
    per_epoch = math.ceil(n / config.batch_size)
    total_iterations = per_epoch * config.epochs
    val_loss, val_acc = _val_metrics(model, data.x_val, data.y_val, config.eval_batch_size)
    history = TrainHistory(val_loss, val_acc, best_val_acc=val_acc)
    best_state = model.state_dict()
    toggles = dict(mirror=config.augment_mirror, flip=config.augment_flip, rotate=config.augment_rotate)

    iteration = 0
    for epoch in range(1, config.epochs + 1):
        rng = np.random.default_rng([config.seed, fold, epoch])
        order = rng.permutation(n)
        wd = config.weight_decay(epoch)
        loss_sum, correct = 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb = augment_batch(data.x_train[idx], rng, **toggles)
            yb = data.y_train[idx]
            lr = clr_triangular(
                iteration, config.lr_base, config.lr_peak, config.clr_step_size,
                total_iterations if config.clr_decay else None, config.lr_final,
            )
            logits = model(Tensor(xb))
            loss = ops.softmax_cross_entropy(logits, yb)
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingError(f"fold {fold} epoch {epoch} iteration {iteration}: non-finite loss {value}")
            optimizer.zero_grad()
            loss.backward()
            try:
                optimizer.step(lr, wd)
            except FloatingPointError as exc:
                raise TrainingError(f"fold {fold} epoch {epoch} iteration {iteration}: {exc}") from exc
            history.lr_trace.append(lr)
            history.loss_trace.append(value)
            loss_sum += value * len(idx)
            correct += int(np.sum(logits.data.argmax(axis=1) == yb))
            iteration += 1
        val_loss, val_acc = _val_metrics(model, data.x_val, data.y_val, config.eval_batch_size)
        history.epochs.append(EpochRecord(epoch, loss_sum / n, correct / n, val_loss, val_acc, wd))
        log.info("fold %d epoch %d: loss %.4f acc %.4f val_loss %.4f val_acc %.4f",
                 fold, epoch, loss_sum / n, correct / n, val_loss, val_acc)
        if val_acc > history.best_val_acc:
            history.best_epoch, history.best_val_acc = epoch, val_acc
            best_state = model.state_dict()

    model.load_state_dict(best_state)
    if checkpoint_path is not None:
        save_weights(model, checkpoint_path)
    return FoldResult(history, model, report)


@dataclass
class FoldReport:
    fold: int
    history: Optional[TrainHistory] = None
    evaluation: Optional[Evaluation] = None
    transfer: Optional[TransferReport] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class CrossValidation:
    plan: FoldPlan
    reports: list[FoldReport]

    @property
    def aggregate(self) -> dict[str, tuple[float, float]]:
        done = [r.evaluation.metrics for r in self.reports if r.ok]
        return aggregate_folds(done) if done else {}


def plan_for(config: TrainConfig, labels: Sequence[int], class_names: Sequence[str] | None = None) -> FoldPlan:
    if config.folds == 1:
        return make_holdout(labels, config.holdout_fraction, config.seed, class_names)
    return make_folds(labels, config.folds, config.seed, class_names)


def _run_one(fold: int, model_builder: ModelBuilder, x: np.ndarray, y: np.ndarray, plan: FoldPlan,
             config: TrainConfig, out_dir: Optional[str], transfer: Optional[str]) -> FoldReport:
    try:
        tr, va = plan.train_indices(fold), plan.val_indices(fold)
        data = FoldData(x[tr], y[tr], x[va], y[va])
        ckpt = None
        if out_dir is not None:
            fold_dir = Path(out_dir) / f"fold_{fold}"
            fold_dir.mkdir(parents=True, exist_ok=True)
            ckpt = fold_dir / "best.nema"
        result = train_fold(model_builder, data, config, fold, ckpt, transfer)
        if out_dir is not None:
            result.history.write_csv(fold_dir / "history.csv")
            result.history.write_trace_csv(fold_dir / "lr_trace.csv")
        evaluation = evaluate_model(result.model, data.x_val, data.y_val, config.eval_batch_size)
        return FoldReport(fold, result.history, evaluation, result.transfer)
    except Exception as exc:  # noqa: BLE001 - a failed fold must not stop the others
        log.error("fold %d failed: %s", fold, exc)
        return FoldReport(fold, error=f"{type(exc).__name__}: {exc}")


def run_cross_validation(
    model_builder: ModelBuilder,
    x: np.ndarray,
    y: np.ndarray,
    config: TrainConfig,
    plan: FoldPlan | None = None,
    out_dir: str | os.PathLike | None = None,
    transfer: str | os.PathLike | None = None,
    parallel: bool = False,
    class_names: Sequence[str] | None = None,
) -> CrossValidation:
    """Train and evaluate every fold; returns reports in fold order."""
    y = np.asarray(y, dtype=np.int64)
    plan = plan or plan_for(config, y, class_names)
    args = (model_builder, x, y, plan, config,
            None if out_dir is None else str(out_dir), None if transfer is None else str(transfer))
    folds = range(len(plan.folds))
    if parallel and len(plan.folds) > 1:
        with ProcessPoolExecutor(max_workers=min(len(plan.folds), os.cpu_count() or 1)) as pool:
            reports = list(pool.map(_run_one, folds, *(([a] * len(plan.folds)) for a in args)))
    else:
        reports = [_run_one(f, *args) for f in folds]
    return CrossValidation(plan, reports)
