"""Stratified k-fold partitions."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class FoldPlan:
    """``folds[i]`` are the validation indices of fold ``i``; the rest train it."""

    k: int
    n: int
    folds: tuple[tuple[int, ...], ...]

    def val_indices(self, i: int) -> list[int]:
        return list(self.folds[i])

    def train_indices(self, i: int) -> list[int]:
        held = set(self.folds[i])
        return [j for j in range(self.n) if j not in held]

    def to_dict(self) -> dict:
        return {"k": self.k, "n": self.n, "folds": [list(f) for f in self.folds]}

    @classmethod
    def from_dict(cls, data: dict) -> "FoldPlan":
        return cls(int(data["k"]), int(data["n"]), tuple(tuple(int(i) for i in f) for f in data["folds"]))


def make_folds(labels: Sequence[int], k: int = 5, seed: int = 0, class_names: Sequence[str] | None = None) -> FoldPlan:
    """Stratified, seeded split into ``k`` folds.

    Indices are shuffled within each class and laid out class after class;
    position ``p`` in that sequence goes to fold ``p mod k``. Dealing a
    contiguous run round-robin keeps every class within one sample of even
    across folds, and dealing the whole sequence keeps fold sizes within one.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2 for cross-validation, got {k}")
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    counts = Counter(labels.tolist())
    for cls, count in sorted(counts.items()):
        if count < k:
            name = class_names[cls] if class_names is not None else str(cls)
            raise ValueError(f"class {name!r} has {count} samples, fewer than k={k} folds")
    rng = np.random.default_rng(seed)
    sequence = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in sorted(counts)])
    folds = tuple(tuple(sorted(int(i) for i in sequence[f::k])) for f in range(k))
    return FoldPlan(k, int(labels.size), folds)


def make_holdout(labels: Sequence[int], fraction: float = 0.2, seed: int = 0,
                 class_names: Sequence[str] | None = None) -> FoldPlan:
    """Single stratified validation split holding out about ``fraction`` of each class."""
    k = max(2, int(round(1 / fraction)))
    plan = make_folds(labels, k, seed, class_names)
    return FoldPlan(1, plan.n, (plan.folds[0],))
