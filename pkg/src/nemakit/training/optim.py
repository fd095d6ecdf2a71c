"""SGD with momentum and L2 weight decay, plus the triangular cyclic learning rate."""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Optional

import numpy as np

from ..engine.tensor import Parameter


def sgd_step(param: np.ndarray, grad: np.ndarray, velocity: np.ndarray, lr: float, momentum: float,
             weight_decay: float, name: str = "parameter") -> None:
    """In place: v <- momentum*v - lr*(g + wd*theta); theta <- theta + v."""
    if not np.isfinite(grad).all():
        raise FloatingPointError(f"non-finite gradient for {name}")
    velocity *= momentum
    velocity -= lr * (grad + weight_decay * param)
    param += velocity


class SGD:
    """Momentum SGD over the trainable parameters of a model."""

    def __init__(self, params: Iterable[tuple[str, Parameter]], momentum: float = 0.9):
        self.params = [(name, p) for name, p in params if p.trainable]
        self.momentum = momentum
        self.velocity = {name: np.zeros_like(p.data) for name, p in self.params}

    def step(self, lr: float, weight_decay: float) -> None:
        for name, p in self.params:
            if p.grad is None:
                continue
            sgd_step(p.data, p.grad, self.velocity[name], lr, self.momentum, weight_decay, name)

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.grad = None


def clr_triangular(iteration: int, lr_min: float, lr_max: float, step_size: int,
                   total_iterations: Optional[int] = None, lr_final: Optional[float] = None) -> float:
    """Triangular cyclic learning rate.

    Rises linearly from ``lr_min`` at iteration 0 to ``lr_max`` at
    ``step_size`` and back down by ``2*step_size``. When ``total_iterations``
    and ``lr_final`` are given the waveform is additionally scaled by a
    linear envelope going from 1 to ``lr_final / lr_max`` over the run.
    """
    if lr_min >= lr_max:
        raise ValueError(f"lr_min {lr_min} must be below lr_max {lr_max}")
    if step_size < 1:
        raise ValueError(f"step_size must be >= 1, got {step_size}")
    # exact rationals, rounded once, so every trace entry is the nearest float
    pos = iteration % (2 * step_size)
    lo, hi = Fraction(lr_min), Fraction(lr_max)
    lr = lo + (hi - lo) * Fraction(min(pos, 2 * step_size - pos), step_size)
    if total_iterations is not None and lr_final is not None:
        lr *= _envelope(iteration, total_iterations, Fraction(lr_final) / hi)
    return float(lr)


def _envelope(iteration: int, total_iterations: int, final_ratio: Fraction) -> Fraction:
    if total_iterations <= 1:
        return Fraction(1)
    return 1 - (1 - final_ratio) * Fraction(min(iteration, total_iterations - 1), total_iterations - 1)


def decay_envelope(iteration: int, total_iterations: int, final_ratio: float) -> float:
    return float(_envelope(iteration, total_iterations, Fraction(final_ratio)))
