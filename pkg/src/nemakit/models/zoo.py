"""DenseNet121 and NemaNet topologies."""

from __future__ import annotations

from typing import Mapping, Optional, Sequence

import numpy as np

from . import blocks
from .graph import INPUT, LayerGraph

DENSENET121_LAYERS = (6, 12, 24, 16)
DENSENET121_PARAMS_IMAGENET = 8_062_504
NEMANET_TARGET_CENSUS = {"total": 17_918_565, "trainable": 17_817_925, "non_trainable": 100_640}

# Inception-branch widths of the default NemaNet: InceptionV3 widths adjusted
# in steps of 16 so the census lands near the published totals, which do not
# pin down the layout on their own.
NEMANET_INCEPTION_WIDTHS: dict[str, dict[str, int]] = {
    "reduce1": {"b3_reduce": 112, "b3": 160, "dbl_reduce": 112, "dbl": 96},
    "inception_a": {"b1x1": 64, "b3x3_reduce": 48, "b3x3": 64, "dbl_reduce": 96, "dbl": 128, "pool": 96},
    "reduce2": {"b3_reduce": 192, "b3": 384, "dbl_reduce": 64, "dbl": 96},
    "inception_b": {"b1x1": 192, "b7_reduce": 160, "b7": 240, "dbl7_reduce": 160, "dbl7": 192, "pool": 192},
    "reduce3": {"b3_reduce": 224, "b3": 352, "dbl_reduce": 192, "dbl": 192},
    "inception_c": {
        "b1x1": 336, "b3_reduce": 400, "b3": 432, "dbl_reduce": 480, "dbl_mid": 400, "dbl": 416, "pool": 208,
    },
}


def _scale(width: int, divisor: int) -> int:
    return max(1, width // divisor)


def _check_input_size(input_size: int) -> None:
    if input_size < 32 or input_size % 32:
        raise ValueError(f"input size must be a positive multiple of 32, got {input_size}")


def _densenet_trunk(
    graph: LayerGraph,
    rng: np.random.Generator,
    growth_rate: int,
    block_layers: Sequence[int],
    stem_channels: int,
    compression: float,
    bn: Mapping[str, float],
) -> tuple[str, int]:
    """Add stem, dense blocks, transitions and the closing BN-ReLU; return (last node, channels)."""
    graph.add("stem", blocks.build_stem(graph.in_channels, stem_channels, bn), [INPUT], rng)
    prev, channels = "stem", stem_channels
    for i, layers in enumerate(block_layers, start=1):
        spec = blocks.build_dense_block(channels, growth_rate, layers, bn)
        graph.add(f"dense{i}", spec, [prev], rng)
        prev, channels = f"dense{i}", spec.out_channels
        if i < len(block_layers):
            spec = blocks.build_transition(channels, compression, bn)
            graph.add(f"transition{i}", spec, [prev], rng)
            prev, channels = f"transition{i}", spec.out_channels
    graph.add("final_norm", blocks.build_norm_relu(channels, bn), [prev], rng)
    return "final_norm", channels


def build_densenet121(
    num_classes: int = 1000,
    input_size: int = 224,
    *,
    width_divisor: int = 1,
    growth_rate: int = 32,
    block_layers: Sequence[int] = DENSENET121_LAYERS,
    stem_channels: int = 64,
    compression: float = 0.5,
    bn: Optional[Mapping[str, float]] = None,
    seed: int = 0,
) -> LayerGraph:
    _check_input_size(input_size)
    bn = dict(bn or {})
    rng = np.random.default_rng(seed)
    graph = LayerGraph("densenet121", 3, input_size, seed)
    last, channels = _densenet_trunk(
        graph, rng, _scale(growth_rate, width_divisor), block_layers,
        _scale(stem_channels, width_divisor), compression, bn,
    )
    graph.add("classifier", blocks.build_classifier(channels, num_classes), [last], rng)
    graph.validate()
    return graph


def build_nemanet(
    num_classes: int = 5,
    input_size: int = 224,
    *,
    width_divisor: int = 1,
    growth_rate: int = 32,
    block_layers: Sequence[int] = DENSENET121_LAYERS,
    stem_channels: int = 64,
    compression: float = 0.5,
    inception_widths: Optional[Mapping[str, Mapping[str, int]]] = None,
    bn: Optional[Mapping[str, float]] = None,
    seed: int = 0,
) -> LayerGraph:
    """DenseNet121 trunk and a parallel Inception A/B/C branch sharing one stem.

    The Inception branch halves the grid three times so it meets the trunk
    output at the same spatial size; both are concatenated on channels and
    classified by global average pooling and one dense layer.
    """
    _check_input_size(input_size)
    bn = dict(bn or {})
    widths = {k: dict(v) for k, v in NEMANET_INCEPTION_WIDTHS.items()}
    for key, override in (inception_widths or {}).items():
        if key not in widths:
            raise ValueError(f"unknown inception stage {key!r}")
        widths[key].update(override)
    widths = {k: {b: _scale(w, width_divisor) for b, w in v.items()} for k, v in widths.items()}

    rng = np.random.default_rng(seed)
    graph = LayerGraph("nemanet", 3, input_size, seed)
    trunk, trunk_channels = _densenet_trunk(
        graph, rng, _scale(growth_rate, width_divisor), block_layers,
        _scale(stem_channels, width_divisor), compression, bn,
    )
    prev, channels = "stem", graph.nodes["stem"].spec.out_channels
    for stage, kind in (
        ("reduce1", "reduction"), ("inception_a", "A"),
        ("reduce2", "reduction"), ("inception_b", "B"),
        ("reduce3", "reduction"), ("inception_c", "C"),
    ):
        spec = blocks.build_inception_block(kind, channels, widths[stage], bn)
        graph.add(stage, spec, [prev], rng)
        prev, channels = stage, spec.out_channels
    fused = trunk_channels + channels
    graph.add("fusion", blocks.build_concat(fused, fused), [trunk, prev], rng)
    graph.add("fusion_classifier", blocks.build_classifier(fused, num_classes), ["fusion"], rng)
    graph.validate()
    return graph


BUILDERS = {"nemanet": build_nemanet, "densenet121": build_densenet121}


def build_model(name: str, num_classes: int, input_size: int, **kwargs) -> LayerGraph:
    try:
        builder = BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(BUILDERS)}") from None
    return builder(num_classes, input_size, **kwargs)
