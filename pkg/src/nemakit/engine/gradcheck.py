"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .tensor import Tensor, no_grad, record_branches, replay_branches

DEFAULT_TOLERANCE = {np.dtype(np.float32): 1e-2, np.dtype(np.float64): 1e-5}
# about cbrt(eps): balances truncation (h^2) against rounding (eps / h)
DEFAULT_STEP = {np.dtype(np.float32): 5e-3, np.dtype(np.float64): 6e-6}
# rounding noise of a difference quotient is about eps * |f| / step; errors
# below this many multiples of that bound are not attributed to the gradient
NOISE_MULTIPLIER = 64.0
# components far smaller than the tensor's largest gradient are compared
# against that fraction of it instead of their own magnitude
SCALE_FLOOR = {np.dtype(np.float32): 1e-2, np.dtype(np.float64): 1e-3}


@dataclass
class GradCheckReport:
    max_rel_error: float
    passed: bool
    tolerance: float
    step: float
    checked: int
    per_tensor: dict[str, float] = field(default_factory=dict)

    def worst(self) -> str:
        if not self.per_tensor:
            return ""
        return max(self.per_tensor, key=self.per_tensor.get)


def gradient_check(
    fn: Callable[[], Tensor],
    inputs: Union[Mapping[str, Tensor], Sequence[Tensor]],
    tolerance: Optional[float] = None,
    step: Optional[float] = None,
    samples: int = 24,
    seed: int = 0,
) -> GradCheckReport:
    """Compare backprop gradients of ``fn`` against central differences.

    ``fn`` is re-evaluated with individual scalars of ``inputs`` perturbed in
    place by +/- ``step``. Non-scalar outputs are reduced to a scalar through
    a fixed random projection. At most ``samples`` scalars per input tensor
    are probed. ReLU and max-pool decisions are frozen at the unperturbed
    point for every probe.
    """
    if not isinstance(inputs, Mapping):
        inputs = {f"input{i}": t for i, t in enumerate(inputs)}
    if not inputs:
        raise ValueError("gradient_check needs at least one input tensor")
    dtype = next(iter(inputs.values())).dtype
    tolerance = DEFAULT_TOLERANCE[dtype] if tolerance is None else tolerance
    step = DEFAULT_STEP[dtype] if step is None else step
    rng = np.random.default_rng(seed)

    for t in inputs.values():
        t.grad = None
    with record_branches() as tape:
        out = fn()
    _require_finite(out.data, "forward output")
    projection = np.ones(out.shape) if out.size == 1 else rng.standard_normal(out.shape)
    out.backward(projection.astype(out.dtype))
    analytic = {}
    for name, t in inputs.items():
        g = np.zeros_like(t.data) if t.grad is None else t.grad
        _require_finite(g, f"gradient of {name}")
        analytic[name] = g.astype(np.float64)

    eps = float(np.finfo(dtype).eps)

    # probes replay the ReLU masks and max-pool winners of the unperturbed
    # pass, so a step never lands on a different linear piece than the one
    # backprop differentiated
    def objective() -> tuple[float, float]:
        with no_grad(), replay_branches(tape):
            y = fn().data.astype(np.float64)
        _require_finite(y, "forward output")
        terms = y * projection
        return float(terms.sum()), float(np.abs(terms).sum())

    worst = 0.0
    per_tensor: dict[str, float] = {}
    checked = 0
    for name, t in inputs.items():
        flat = t.data.reshape(-1)
        grad = analytic[name].reshape(-1)
        tensor_worst = 0.0
        scale = SCALE_FLOOR[dtype] * float(np.abs(grad).max(initial=0.0))
        idx = np.arange(flat.size) if flat.size <= samples else rng.choice(flat.size, samples, replace=False)
        for i in idx:
            original = flat[i]
            up = flat.dtype.type(original + step)
            down = flat.dtype.type(original - step)
            flat[i] = up
            f_up, mag_up = objective()
            flat[i] = down
            f_down, mag_down = objective()
            flat[i] = original
            width = float(up) - float(down)
            numeric = (f_up - f_down) / width
            a = grad[i]
            noise = NOISE_MULTIPLIER * eps * max(mag_up, mag_down) / width
            denom = max(abs(a), abs(numeric), noise, scale, np.finfo(np.float64).tiny)
            tensor_worst = max(tensor_worst, abs(a - numeric) / denom)
            checked += 1
        per_tensor[name] = tensor_worst
        worst = max(worst, tensor_worst)
    return GradCheckReport(worst, worst <= tolerance, tolerance, step, checked, per_tensor)


def _require_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise FloatingPointError(f"non-finite values in {what}")
