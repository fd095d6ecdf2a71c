"""Optimizer, learning-rate schedule, augmentation, folds and the training loop."""

from .augment import augment, augment_batch
from .config import SEED_ENV, ConfigError, TrainConfig, apply_env, default_config
from .folds import FoldPlan, make_folds, make_holdout
from .loop import (
    CrossValidation,
    EpochRecord,
    FoldData,
    FoldReport,
    FoldResult,
    TrainHistory,
    TrainingError,
    TransferReport,
    model_builder_for,
    plan_for,
    run_cross_validation,
    train_fold,
    transfer_init,
)
from .optim import SGD, clr_triangular, decay_envelope, sgd_step

__all__ = [
    "SEED_ENV",
    "SGD",
    "ConfigError",
    "CrossValidation",
    "EpochRecord",
    "FoldData",
    "FoldPlan",
    "FoldReport",
    "FoldResult",
    "TrainConfig",
    "TrainHistory",
    "TrainingError",
    "TransferReport",
    "apply_env",
    "augment",
    "augment_batch",
    "clr_triangular",
    "decay_envelope",
    "default_config",
    "make_folds",
    "make_holdout",
    "model_builder_for",
    "plan_for",
    "run_cross_validation",
    "sgd_step",
    "train_fold",
    "transfer_init",
]
