"""Named-node DAG of blocks, shape inference and parameter accounting."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..engine.tensor import Parameter, Tensor
from .blocks import BlockSpec
from .layers import Module

INPUT = "input"


@dataclass
class Node:
    name: str
    spec: BlockSpec
    inputs: tuple[str, ...]
    module: Module


@dataclass
class LayerCount:
    name: str
    total: int
    trainable: int
    non_trainable: int


@dataclass
class ParamCensus:
    total: int
    trainable: int
    non_trainable: int
    per_layer: list[LayerCount] = field(default_factory=list)

    @classmethod
    def of(cls, named: Sequence[tuple[str, Parameter]]) -> "ParamCensus":
        layers: dict[str, LayerCount] = {}
        for name, p in named:
            owner = name.rsplit(".", 1)[0]
            row = layers.setdefault(owner, LayerCount(owner, 0, 0, 0))
            row.total += p.size
            if p.trainable:
                row.trainable += p.size
            else:
                row.non_trainable += p.size
        trainable = sum(r.trainable for r in layers.values())
        non_trainable = sum(r.non_trainable for r in layers.values())
        return cls(trainable + non_trainable, trainable, non_trainable, list(layers.values()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["layer", "total", "trainable", "non_trainable"])
        for r in self.per_layer:
            writer.writerow([r.name, r.total, r.trainable, r.non_trainable])
        writer.writerow(["TOTAL", self.total, self.trainable, self.non_trainable])
        return buf.getvalue()


class LayerGraph(Module):
    """A single-input, single-output DAG of named blocks.

    Nodes must be added after all of their inputs, so insertion order is a
    topological order and cycles cannot be expressed.
    """

    def __init__(self, name: str, in_channels: int = 3, input_size: int = 224, seed: int = 0):
        super().__init__()
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "in_channels", in_channels)
        object.__setattr__(self, "input_size", input_size)
        object.__setattr__(self, "seed", seed)
        object.__setattr__(self, "nodes", {})
        object.__setattr__(self, "_shapes", {INPUT: (in_channels, input_size, input_size)})

    def add(self, name: str, spec: BlockSpec, inputs: Sequence[str], rng: np.random.Generator) -> Node:
        if name in self.nodes or name == INPUT:
            raise ValueError(f"duplicate node name {name!r}")
        missing = [i for i in inputs if i != INPUT and i not in self.nodes]
        if missing:
            raise ValueError(f"node {name!r} consumes unknown nodes {missing}")
        shape = spec.output_shape(*(self._shapes[i] for i in inputs))
        module = spec.build(rng)
        node = Node(name, spec, tuple(inputs), module)
        self.nodes[name] = node
        self._shapes[name] = shape
        self.add_module(name, module)
        return node

    @property
    def output_node(self) -> str:
        return next(reversed(self.nodes))

    @property
    def num_classes(self) -> int:
        return self.nodes[self.output_node].spec.out_channels

    def infer_shapes(self, input_size: Optional[int] = None) -> dict[str, tuple[int, int, int]]:
        """Per-node (C, H, W) for a square input of ``input_size`` pixels."""
        size = self.input_size if input_size is None else input_size
        shapes = {INPUT: (self.in_channels, size, size)}
        for node in self.nodes.values():
            shapes[node.name] = node.spec.output_shape(*(shapes[i] for i in node.inputs))
        return shapes

    def validate(self) -> None:
        """Check single output, full reachability and shape inference."""
        consumed = {i for node in self.nodes.values() for i in node.inputs}
        sinks = [n for n in self.nodes if n not in consumed]
        if sinks != [self.output_node]:
            raise ValueError(f"graph must have exactly one output node, found {sinks}")
        reachable = {INPUT}
        for node in self.nodes.values():
            if any(i in reachable for i in node.inputs):
                reachable.add(node.name)
        unreachable = [n for n in self.nodes if n not in reachable]
        if unreachable:
            raise ValueError(f"nodes not reachable from the input: {unreachable}")
        self.infer_shapes()

    def forward(self, x: Tensor) -> Tensor:
        values = {INPUT: x}
        for node in self.nodes.values():
            values[node.name] = node.module(*(values[i] for i in node.inputs))
        return values[self.output_node]

    def named_parameters(self, prefix: str = ""):
        for name, p in super().named_parameters(prefix):
            p.name = name
            yield name, p

    def census(self) -> ParamCensus:
        return ParamCensus.of(list(self.named_parameters()))

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for name, p in self.named_parameters():
            p.data[...] = state[name]
