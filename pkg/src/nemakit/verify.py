"""Gradient-check cases for every operator, every block kind and a small model.

Each case draws its own random shapes, so the suite covers several
configurations per op/block rather than one hand-picked example.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .engine import Parameter, Tensor, gradient_check, ops, precision
from .engine.gradcheck import GradCheckReport
from .models import blocks
from .models.zoo import build_nemanet

SCOPES = ("ops", "blocks", "model")
SHAPES_PER_CASE = 3

Setup = Callable[[np.random.Generator], tuple[Callable[[], Tensor], dict[str, Tensor]]]


@dataclass(frozen=True)
class GradCase:
    scope: str
    name: str
    setup: Setup


@dataclass(frozen=True)
class CaseResult:
    scope: str
    name: str
    variant: int
    report: GradCheckReport


def _t(rng, *shape, scale=1.0) -> Tensor:
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)


def _conv(rng):
    n, c, o = rng.integers(1, 3), rng.integers(1, 4), rng.integers(1, 4)
    kh, kw = (int(k) for k in rng.choice([1, 3], size=2))
    stride, ph, pw = int(rng.integers(1, 3)), int(rng.integers(0, 2)), int(rng.integers(0, 2))
    h, w = rng.integers(kh + 2, 8), rng.integers(kw + 2, 8)
    x, wt, b = _t(rng, n, c, h, w), _t(rng, o, c, kh, kw), _t(rng, o)
    return (lambda: ops.conv2d(x, wt, b, stride, (ph, pw))), {"x": x, "weight": wt, "bias": b}


def _batch_norm(training: bool) -> Setup:
    def setup(rng):
        n, c, h, w = rng.integers(2, 4), rng.integers(1, 4), rng.integers(2, 5), rng.integers(2, 5)
        x, gamma, beta = _t(rng, n, c, h, w), _t(rng, c), _t(rng, c)
        rm = Tensor(rng.standard_normal(c) * 0.1)
        rv = Tensor(rng.uniform(0.5, 1.5, c))
        fn = lambda: ops.batch_norm(x, gamma, beta, rm, rv, training, 0.1, 1e-5)  # noqa: E731
        return fn, {"x": x, "gamma": gamma, "beta": beta}
    return setup


def _relu(rng):
    x = _t(rng, *rng.integers(1, 5, size=4))
    return (lambda: ops.relu(x)), {"x": x}


def _pool(kind: str) -> Setup:
    def setup(rng):
        window = int(rng.integers(2, 4))
        stride, pad = int(rng.integers(1, 3)), int(rng.integers(0, window // 2 + 1))
        n, c = rng.integers(1, 3), rng.integers(1, 3)
        h, w = rng.integers(window + 1, 8), rng.integers(window + 1, 8)
        x = _t(rng, n, c, h, w)
        return (lambda: ops.pool2d(x, kind, window, stride, pad)), {"x": x}
    return setup


def _gap(rng):
    x = _t(rng, *rng.integers(1, 5, size=4))
    return (lambda: ops.global_average_pool(x)), {"x": x}


def _concat(rng):
    n, h, w = rng.integers(1, 3), rng.integers(1, 4), rng.integers(1, 4)
    parts = {f"x{i}": _t(rng, n, int(rng.integers(1, 4)), h, w) for i in range(int(rng.integers(2, 4)))}
    return (lambda: ops.concat(list(parts.values()))), parts


def _linear(rng):
    n, f, k = rng.integers(1, 5), rng.integers(1, 6), rng.integers(1, 5)
    x, w, b = _t(rng, n, f), _t(rng, f, k), _t(rng, k)
    return (lambda: ops.linear(x, w, b)), {"x": x, "weight": w, "bias": b}


def _cross_entropy(rng):
    n, k = rng.integers(1, 6), rng.integers(2, 6)
    logits = _t(rng, n, k, scale=2.0)
    labels = rng.integers(0, k, size=n)
    return (lambda: ops.softmax_cross_entropy(logits, labels)), {"logits": logits}


OP_CASES = (
    GradCase("ops", "conv2d", _conv),
    GradCase("ops", "batch_norm[train]", _batch_norm(True)),
    GradCase("ops", "batch_norm[eval]", _batch_norm(False)),
    GradCase("ops", "relu", _relu),
    GradCase("ops", "max_pool", _pool("max")),
    GradCase("ops", "average_pool", _pool("average")),
    GradCase("ops", "global_average_pool", _gap),
    GradCase("ops", "concat", _concat),
    GradCase("ops", "linear", _linear),
    GradCase("ops", "softmax_cross_entropy", _cross_entropy),
)


def _module_case(make_spec, size_range=(4, 9), batch=2, inputs=1) -> Setup:
    """Check a built block w.r.t. its input(s) and every trainable parameter."""
    def setup(rng):
        spec = make_spec(rng)
        module = spec.build(rng)
        size = int(rng.integers(*size_range))
        if spec.kind == "concat":
            splits = np.diff(np.r_[0, np.sort(rng.choice(np.arange(1, spec.in_channels), inputs - 1, replace=False)), spec.in_channels])
            xs = [_t(rng, batch, int(c), size, size) for c in splits]
        else:
            xs = [_t(rng, batch, spec.in_channels, size, size)]
        tensors = {f"x{i}": x for i, x in enumerate(xs)}
        for name, p in module.named_parameters():
            if p.trainable:
                p.data = np.ascontiguousarray(p.data, dtype=xs[0].dtype)
                tensors[name] = p
        module.train()
        return (lambda: module(*xs)), tensors
    return setup


def _small_widths(kind: str, rng) -> dict[str, int]:
    # at least two channels per branch: a single-channel conv feeding a
    # training-mode BN is scale invariant, so its weight gradient is zero
    key = {"A": "inception_a", "B": "inception_b", "C": "inception_c"}.get(kind, kind)
    return {b: int(rng.integers(2, 5)) for b in blocks.INCEPTION_WIDTHS[key]}


BLOCK_CASES = (
    GradCase("blocks", "stem", _module_case(lambda r: blocks.build_stem(int(r.integers(1, 4)), int(r.integers(2, 5))), (8, 14))),
    GradCase("blocks", "conv_block", _module_case(lambda r: blocks.build_conv_block(int(r.integers(2, 5)), int(r.integers(2, 4))))),
    GradCase("blocks", "dense_block", _module_case(lambda r: blocks.build_dense_block(int(r.integers(2, 5)), int(r.integers(2, 4)), int(r.integers(1, 4))))),
    GradCase("blocks", "transition", _module_case(lambda r: blocks.build_transition(int(r.integers(2, 6)), 0.5))),
    GradCase("blocks", "inception_a", _module_case(lambda r: blocks.build_inception_block("A", int(r.integers(2, 5)), _small_widths("A", r)))),
    GradCase("blocks", "inception_b", _module_case(lambda r: blocks.build_inception_block("B", int(r.integers(2, 5)), _small_widths("B", r)), (7, 10))),
    GradCase("blocks", "inception_c", _module_case(lambda r: blocks.build_inception_block("C", int(r.integers(2, 5)), _small_widths("C", r)))),
    GradCase("blocks", "reduction", _module_case(lambda r: blocks.build_inception_block("reduction", int(r.integers(2, 5)), _small_widths("reduction", r)), (5, 10))),
    GradCase("blocks", "norm_relu", _module_case(lambda r: blocks.build_norm_relu(int(r.integers(1, 4))))),
    GradCase("blocks", "concat", _module_case(lambda r: blocks.build_concat(*(2 * [int(r.integers(3, 7))])), inputs=2)),
    GradCase("blocks", "classifier", _module_case(lambda r: blocks.build_classifier(int(r.integers(1, 6)), int(r.integers(2, 6))), (1, 4))),
)


def _model_case(rng):
    """Width-reduced NemaNet at 64 px, checked through the loss w.r.t. a sample of weights.

    64 px keeps the deepest grid at 2x2, so with a batch of 4 every batch
    norm sees 16 values per channel instead of a degenerate pair.
    """
    model = build_nemanet(3, 64, width_divisor=16, block_layers=(1, 1, 1, 1), seed=int(rng.integers(1 << 30)))
    model.train()
    x = Tensor(rng.uniform(0, 1, (4, 3, 64, 64)))
    labels = rng.integers(0, 3, size=4)
    named = [(n, p) for n, p in model.named_parameters() if p.trainable]
    picks = {named[i][0]: named[i][1] for i in sorted(rng.choice(len(named), 8, replace=False))}
    picks["fusion_classifier.fc.weight"] = dict(named)["fusion_classifier.fc.weight"]
    return (lambda: ops.softmax_cross_entropy(model(x), labels)), picks


MODEL_CASES = (GradCase("model", "nemanet[reduced]", _model_case),)


def _corrupted_relu(rng):
    """Negative control: a ReLU whose backward pass is scaled by 1.5."""
    x = _t(rng, 2, 3, 4, 4)

    def fn():
        out = ops.relu(x)
        mask = x.data > 0
        return Tensor.from_op(out.data, (x,), lambda g: (1.5 * g * mask,), "corrupted_relu")

    return fn, {"x": x}


NEGATIVE_CONTROL = GradCase("ops", "negative_control[corrupted relu backward]", _corrupted_relu)


def cases(scope: str) -> tuple[GradCase, ...]:
    if scope == "ops":
        return OP_CASES
    if scope == "blocks":
        return BLOCK_CASES
    if scope == "model":
        return MODEL_CASES
    raise ValueError(f"unknown scope {scope!r}; choose from {SCOPES}")


def run_suite(scope: str, dtype=np.float32, seed: int = 0, variants: int = SHAPES_PER_CASE,
              negative_control: bool = False) -> Iterator[CaseResult]:
    """Yield one result per (case, random variant) under the given precision."""
    selected = list(cases(scope)) + ([NEGATIVE_CONTROL] if negative_control else [])
    with precision(dtype):
        for index, case in enumerate(selected):
            for variant in range(variants):
                rng = np.random.default_rng([seed, index, variant])
                fn, inputs = case.setup(rng)
                for t in inputs.values():
                    if not isinstance(t, Parameter):
                        t.data = np.ascontiguousarray(t.data, dtype=dtype)
                yield CaseResult(case.scope, case.name, variant, gradient_check(fn, inputs, seed=seed))
