"""Block specifications and their module realizations.

A :class:`BlockSpec` carries the channel/shape arithmetic of one block and
can be checked before any weights exist; :meth:`BlockSpec.build` turns it
into a :class:`~nemakit.models.layers.Module`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from ..engine import ops
from .layers import BatchNorm2d, Classifier, Concat, Conv2d, ConvBNReLU, Module, NormReLU

KINDS = (
    "stem",
    "conv_block",
    "dense_block",
    "transition",
    "inception_a",
    "inception_b",
    "inception_c",
    "reduction",
    "norm_relu",
    "concat",
    "classifier",
)

# InceptionV3-style branch widths
INCEPTION_WIDTHS = {
    "inception_a": {"b1x1": 64, "b3x3_reduce": 48, "b3x3": 64, "dbl_reduce": 64, "dbl": 96, "pool": 32},
    "inception_b": {"b1x1": 192, "b7_reduce": 128, "b7": 192, "dbl7_reduce": 128, "dbl7": 192, "pool": 192},
    "inception_c": {"b1x1": 320, "b3_reduce": 384, "b3": 384, "dbl_reduce": 448, "dbl_mid": 384, "dbl": 384, "pool": 192},
    "reduction": {"b3_reduce": 64, "b3": 128, "dbl_reduce": 64, "dbl": 96},
}


@dataclass(frozen=True)
class BlockSpec:
    kind: str
    in_channels: int
    out_channels: int
    growth_rate: Optional[int] = None
    num_layers: Optional[int] = None
    compression: Optional[float] = None
    widths: Mapping[str, int] = field(default_factory=dict)
    downsample: int = 1
    num_classes: Optional[int] = None
    bn: Mapping[str, float] = field(default_factory=dict)

    def output_shape(self, *input_shapes: tuple[int, int, int]) -> tuple[int, int, int]:
        """(C, H, W) produced from per-input (C, H, W) shapes."""
        if self.kind == "concat":
            c = sum(s[0] for s in input_shapes)
            if any(s[1:] != input_shapes[0][1:] for s in input_shapes):
                raise ValueError(f"concat spatial mismatch: {input_shapes}")
            return c, *input_shapes[0][1:]
        (c, h, w), = input_shapes
        if c != self.in_channels:
            raise ValueError(f"{self.kind} expects {self.in_channels} channels, got {c}")
        if self.kind == "classifier":
            return (self.out_channels, 1, 1)
        if self.kind == "stem":
            h, w = (h + 6 - 7) // 2 + 1, (w + 6 - 7) // 2 + 1
            return self.out_channels, (h + 2 - 3) // 2 + 1, (w + 2 - 3) // 2 + 1
        if self.kind == "reduction":
            return self.out_channels, (h - 1) // 2 + 1, (w - 1) // 2 + 1
        if self.kind == "transition":
            if h < 2 or w < 2:
                raise ValueError(f"transition needs spatial size >= 2, got {h}x{w}")
            return self.out_channels, h // 2, w // 2
        return self.out_channels, h, w

    def build(self, rng: np.random.Generator) -> Module:
        builder = _BUILDERS[self.kind]
        module = builder(self, rng)
        module.spec = self
        return module


def _check_positive(**values):
    for name, v in values.items():
        if v is None or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v}")


def build_stem(in_channels: int = 3, out_channels: int = 64, bn=None) -> BlockSpec:
    _check_positive(in_channels=in_channels, out_channels=out_channels)
    return BlockSpec("stem", in_channels, out_channels, downsample=4, bn=bn or {})


def build_conv_block(in_channels: int, growth_rate: int, bn=None) -> BlockSpec:
    _check_positive(in_channels=in_channels, growth_rate=growth_rate)
    return BlockSpec("conv_block", in_channels, growth_rate, growth_rate=growth_rate, bn=bn or {})


def build_dense_block(in_channels: int, growth_rate: int, num_layers: int, bn=None) -> BlockSpec:
    _check_positive(in_channels=in_channels, growth_rate=growth_rate, num_layers=num_layers)
    out = in_channels + growth_rate * num_layers
    return BlockSpec("dense_block", in_channels, out, growth_rate=growth_rate, num_layers=num_layers, bn=bn or {})


def build_transition(in_channels: int, compression: float = 0.5, bn=None) -> BlockSpec:
    _check_positive(in_channels=in_channels)
    if not 0 < compression <= 1:
        raise ValueError(f"compression must lie in (0, 1], got {compression}")
    out = int(np.floor(in_channels * compression))
    if out < 1:
        raise ValueError(f"compression {compression} leaves no channels from {in_channels}")
    return BlockSpec("transition", in_channels, out, compression=compression, downsample=2, bn=bn or {})


def build_inception_block(kind: str, in_channels: int, branch_widths: Optional[Mapping[str, int]] = None, bn=None) -> BlockSpec:
    """Spec for an Inception block; ``kind`` is "A", "B", "C" or "reduction"."""
    key = {"A": "inception_a", "B": "inception_b", "C": "inception_c", "reduction": "reduction"}.get(kind, kind)
    if key not in INCEPTION_WIDTHS:
        raise ValueError(f"unknown inception kind {kind!r}; expected A, B, C or reduction")
    widths = dict(INCEPTION_WIDTHS[key])
    if branch_widths:
        unknown = set(branch_widths) - set(widths)
        if unknown:
            raise ValueError(f"unknown branch widths for {kind}: {sorted(unknown)}")
        widths.update(branch_widths)
    _check_positive(in_channels=in_channels, **widths)
    if key == "inception_a":
        out = widths["b1x1"] + widths["b3x3"] + widths["dbl"] + widths["pool"]
    elif key == "inception_b":
        out = widths["b1x1"] + widths["b7"] + widths["dbl7"] + widths["pool"]
    elif key == "inception_c":
        out = widths["b1x1"] + 2 * widths["b3"] + 2 * widths["dbl"] + widths["pool"]
    else:
        out = widths["b3"] + widths["dbl"] + in_channels
    return BlockSpec(key, in_channels, out, widths=widths, downsample=2 if key == "reduction" else 1, bn=bn or {})


def build_norm_relu(channels: int, bn=None) -> BlockSpec:
    return BlockSpec("norm_relu", channels, channels, bn=bn or {})


def build_concat(in_channels: int, out_channels: int) -> BlockSpec:
    return BlockSpec("concat", in_channels, out_channels)


def build_classifier(in_channels: int, num_classes: int) -> BlockSpec:
    _check_positive(in_channels=in_channels, num_classes=num_classes)
    return BlockSpec("classifier", in_channels, num_classes, num_classes=num_classes)


# --- realizations -----------------------------------------------------------


class Stem(Module):
    """7x7/2 conv -> BN -> ReLU -> 3x3/2 max pool."""

    def __init__(self, spec: BlockSpec, rng):
        super().__init__()
        self.conv = Conv2d(spec.in_channels, spec.out_channels, 7, rng, stride=2, padding=3)
        self.norm = BatchNorm2d(spec.out_channels, **spec.bn)

    def forward(self, x):
        x = ops.relu(self.norm(self.conv(x)))
        return ops.pool2d(x, "max", 3, 2, 1)


class ConvBlock(Module):
    """BN -> ReLU -> 1x1 conv (4g) -> BN -> ReLU -> 3x3 conv (g)."""

    def __init__(self, spec: BlockSpec, rng):
        super().__init__()
        c, g = spec.in_channels, spec.growth_rate
        self.norm1 = BatchNorm2d(c, **spec.bn)
        self.conv1 = Conv2d(c, 4 * g, 1, rng)
        self.norm2 = BatchNorm2d(4 * g, **spec.bn)
        self.conv2 = Conv2d(4 * g, g, 3, rng, padding=1)

    def forward(self, x):
        x = self.conv1(ops.relu(self.norm1(x)))
        return self.conv2(ops.relu(self.norm2(x)))


class DenseBlock(Module):
    """Each conv block sees the concatenation of the block input and all earlier outputs."""

    def __init__(self, spec: BlockSpec, rng):
        super().__init__()
        self.num_layers = spec.num_layers
        c = spec.in_channels
        for i in range(spec.num_layers):
            self.add_module(f"layer{i + 1}", build_conv_block(c, spec.growth_rate, spec.bn).build(rng))
            c += spec.growth_rate
        assert c == spec.out_channels, (c, spec.out_channels)

    def forward(self, x):
        for i in range(self.num_layers):
            x = ops.concat([x, self._children[f"layer{i + 1}"](x)])
        return x


class Transition(Module):
    """BN -> ReLU -> 1x1 conv (compressed) -> 2x2/2 average pool."""

    def __init__(self, spec: BlockSpec, rng):
        super().__init__()
        self.norm = BatchNorm2d(spec.in_channels, **spec.bn)
        self.conv = Conv2d(spec.in_channels, spec.out_channels, 1, rng)

    def forward(self, x):
        x = self.conv(ops.relu(self.norm(x)))
        return ops.pool2d(x, "average", 2, 2, 0)


class _Inception(Module):
    def _pool_branch(self, x):
        return self.pool_proj(ops.pool2d(x, "average", 3, 1, 1))


class InceptionA(_Inception):
    """1x1 | 1x1 -> 3x3 | 1x1 -> 3x3 -> 3x3 (factored 5x5) | avg pool -> 1x1."""

    def __init__(self, spec: BlockSpec, rng):
        super().__init__()
        w, c, bn = spec.widths, spec.in_channels, spec.bn
        self.b1x1 = ConvBNReLU(c, w["b1x1"], 1, rng, bn=bn)
        self.b3x3_reduce = ConvBNReLU(c, w["b3x3_reduce"], 1, rng, bn=bn)
        self.b3x3 = ConvBNReLU(w["b3x3_reduce"], w["b3x3"], 3, rng, bn=bn)
        self.dbl_reduce = ConvBNReLU(c, w["dbl_reduce"], 1, rng, bn=bn)
        self.dbl_1 = ConvBNReLU(w["dbl_reduce"], w["dbl"], 3, rng, bn=bn)
        self.dbl_2 = ConvBNReLU(w["dbl"], w["dbl"], 3, rng, bn=bn)
        self.pool_proj = ConvBNReLU(c, w["pool"], 1, rng, bn=bn)

    def forward(self, x):
        return ops.concat([
            self.b1x1(x),
            self.b3x3(self.b3x3_reduce(x)),
            self.dbl_2(self.dbl_1(self.dbl_reduce(x))),
            self._pool_branch(x),
        ])


class InceptionB(_Inception):
    """1x1 | 1x1 -> 1x7 -> 7x1 | 1x1 -> 7x1 -> 1x7 -> 7x1 -> 1x7 | avg pool -> 1x1."""

    def __init__(self, spec: BlockSpec, rng):
        super().__init__()
        w, c, bn = spec.widths, spec.in_channels, spec.bn
        r, r2 = w["b7_reduce"], w["dbl7_reduce"]
        self.b1x1 = ConvBNReLU(c, w["b1x1"], 1, rng, bn=bn)
        self.b7_reduce = ConvBNReLU(c, r, 1, rng, bn=bn)
        self.b7_1x7 = ConvBNReLU(r, r, (1, 7), rng, bn=bn)
        self.b7_7x1 = ConvBNReLU(r, w["b7"], (7, 1), rng, bn=bn)
        self.dbl7_reduce = ConvBNReLU(c, r2, 1, rng, bn=bn)
        self.dbl7_7x1a = ConvBNReLU(r2, r2, (7, 1), rng, bn=bn)
        self.dbl7_1x7a = ConvBNReLU(r2, r2, (1, 7), rng, bn=bn)
        self.dbl7_7x1b = ConvBNReLU(r2, r2, (7, 1), rng, bn=bn)
        self.dbl7_1x7b = ConvBNReLU(r2, w["dbl7"], (1, 7), rng, bn=bn)
        self.pool_proj = ConvBNReLU(c, w["pool"], 1, rng, bn=bn)

    def forward(self, x):
        b7 = self.b7_7x1(self.b7_1x7(self.b7_reduce(x)))
        d = self.dbl7_reduce(x)
        d = self.dbl7_1x7b(self.dbl7_7x1b(self.dbl7_1x7a(self.dbl7_7x1a(d))))
        return ops.concat([self.b1x1(x), b7, d, self._pool_branch(x)])


class InceptionC(_Inception):
    """1x1 | 1x1 -> {1x3, 3x1} | 1x1 -> 3x3 -> {1x3, 3x1} | avg pool -> 1x1."""

    def __init__(self, spec: BlockSpec, rng):
        super().__init__()
        w, c, bn = spec.widths, spec.in_channels, spec.bn
        self.b1x1 = ConvBNReLU(c, w["b1x1"], 1, rng, bn=bn)
        self.b3_reduce = ConvBNReLU(c, w["b3_reduce"], 1, rng, bn=bn)
        self.b3_1x3 = ConvBNReLU(w["b3_reduce"], w["b3"], (1, 3), rng, bn=bn)
        self.b3_3x1 = ConvBNReLU(w["b3_reduce"], w["b3"], (3, 1), rng, bn=bn)
        self.dbl_reduce = ConvBNReLU(c, w["dbl_reduce"], 1, rng, bn=bn)
        self.dbl_3x3 = ConvBNReLU(w["dbl_reduce"], w["dbl_mid"], 3, rng, bn=bn)
        self.dbl_1x3 = ConvBNReLU(w["dbl_mid"], w["dbl"], (1, 3), rng, bn=bn)
        self.dbl_3x1 = ConvBNReLU(w["dbl_mid"], w["dbl"], (3, 1), rng, bn=bn)
        self.pool_proj = ConvBNReLU(c, w["pool"], 1, rng, bn=bn)

    def forward(self, x):
        r = self.b3_reduce(x)
        d = self.dbl_3x3(self.dbl_reduce(x))
        return ops.concat([
            self.b1x1(x),
            self.b3_1x3(r), self.b3_3x1(r),
            self.dbl_1x3(d), self.dbl_3x1(d),
            self._pool_branch(x),
        ])


class GridReduction(Module):
    """Halves the grid: 1x1 -> 3x3/2 | 1x1 -> 3x3 -> 3x3/2 | 3x3/2 max pool."""

    def __init__(self, spec: BlockSpec, rng):
        super().__init__()
        w, c, bn = spec.widths, spec.in_channels, spec.bn
        self.b3_reduce = ConvBNReLU(c, w["b3_reduce"], 1, rng, bn=bn)
        self.b3 = ConvBNReLU(w["b3_reduce"], w["b3"], 3, rng, stride=2, padding=1, bn=bn)
        self.dbl_reduce = ConvBNReLU(c, w["dbl_reduce"], 1, rng, bn=bn)
        self.dbl_1 = ConvBNReLU(w["dbl_reduce"], w["dbl"], 3, rng, bn=bn)
        self.dbl_2 = ConvBNReLU(w["dbl"], w["dbl"], 3, rng, stride=2, padding=1, bn=bn)

    def forward(self, x):
        return ops.concat([
            self.b3(self.b3_reduce(x)),
            self.dbl_2(self.dbl_1(self.dbl_reduce(x))),
            ops.pool2d(x, "max", 3, 2, 1),
        ])


_BUILDERS = {
    "stem": Stem,
    "conv_block": ConvBlock,
    "dense_block": DenseBlock,
    "transition": Transition,
    "inception_a": InceptionA,
    "inception_b": InceptionB,
    "inception_c": InceptionC,
    "reduction": GridReduction,
    "norm_relu": lambda spec, rng: NormReLU(spec.in_channels, spec.bn),
    "concat": lambda spec, rng: Concat(),
    "classifier": lambda spec, rng: Classifier(spec.in_channels, spec.num_classes, rng),
}
