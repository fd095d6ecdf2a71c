"""Parameterized layers on top of :mod:`nemakit.engine.ops`."""

from __future__ import annotations

from typing import Iterator, Optional

import numpy as np

from ..engine import ops
from ..engine.tensor import Parameter, Tensor, default_dtype


class Module:
    """Container that registers :class:`Parameter` and child modules by attribute name."""

    def __init__(self) -> None:
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_children", {})
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Parameter):
            self._params[name] = value
        elif isinstance(value, Module):
            self._children[name] = value
        object.__setattr__(self, name, value)

    def add_module(self, name: str, module: "Module") -> "Module":
        setattr(self, name, module)
        return module

    def children(self) -> Iterator[tuple[str, "Module"]]:
        return iter(self._children.items())

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, p in self._params.items():
            yield prefix + name, p
        for name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{name}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def modules(self) -> Iterator["Module"]:
        yield self
        for _, child in self._children.items():
            yield from child.modules()

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            object.__setattr__(m, "training", mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def to(self, dtype) -> "Module":
        """Cast every parameter buffer in place (used for 64-bit gradient checks)."""
        for p in self.parameters():
            p.data = np.ascontiguousarray(p.data, dtype=dtype)
            p.grad = None
        return self

    def forward(self, *args):
        raise NotImplementedError

    def __call__(self, *args):
        return self.forward(*args)


def he_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(default_dtype())


class Conv2d(Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: tuple[int, int] | int,
        rng: np.random.Generator,
        stride: int = 1,
        padding: tuple[int, int] | int | str = 0,
        bias: bool = False,
    ):
        super().__init__()
        kh, kw = (kernel, kernel) if isinstance(kernel, int) else kernel
        if padding == "same":
            padding = (kh // 2, kw // 2)
        self.stride = stride
        self.padding = padding
        self.weight = Parameter(he_uniform(rng, (out_channels, in_channels, kh, kw), in_channels * kh * kw))
        self.bias = Parameter(np.zeros(out_channels, dtype=default_dtype())) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, self.stride, self.padding)


class BatchNorm2d(Module):
    def __init__(self, channels: int, momentum: float = 0.1, epsilon: float = 1e-5):
        super().__init__()
        dt = default_dtype()
        self.momentum = momentum
        self.epsilon = epsilon
        self.gamma = Parameter(np.ones(channels, dtype=dt))
        self.beta = Parameter(np.zeros(channels, dtype=dt))
        self.running_mean = Parameter(np.zeros(channels, dtype=dt), trainable=False)
        self.running_var = Parameter(np.ones(channels, dtype=dt), trainable=False)

    @property
    def channels(self) -> int:
        return self.gamma.shape[0]

    def forward(self, x: Tensor) -> Tensor:
        return ops.batch_norm(
            x, self.gamma, self.beta, self.running_mean, self.running_var,
            self.training, self.momentum, self.epsilon,
        )


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        super().__init__()
        self.weight = Parameter(he_uniform(rng, (in_features, out_features), in_features))
        self.bias = Parameter(np.zeros(out_features, dtype=default_dtype()))

    def forward(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.weight, self.bias)


class ConvBNReLU(Module):
    """conv -> BN -> ReLU, the Inception building unit."""

    def __init__(self, in_channels, out_channels, kernel, rng, stride=1, padding="same", bn=None):
        super().__init__()
        bn = bn or {}
        self.conv = Conv2d(in_channels, out_channels, kernel, rng, stride=stride, padding=padding)
        self.norm = BatchNorm2d(out_channels, **bn)

    def forward(self, x):
        return ops.relu(self.norm(self.conv(x)))


class NormReLU(Module):
    """BN -> ReLU; closes the DenseNet trunk before pooling."""

    def __init__(self, channels: int, bn: Optional[dict] = None):
        super().__init__()
        self.norm = BatchNorm2d(channels, **(bn or {}))

    def forward(self, x):
        return ops.relu(self.norm(x))


class Concat(Module):
    def forward(self, *inputs):
        return ops.concat(list(inputs), axis=1)


class Classifier(Module):
    """Global average pool followed by a dense layer producing class logits."""

    def __init__(self, in_features: int, num_classes: int, rng: np.random.Generator):
        super().__init__()
        self.fc = Linear(in_features, num_classes, rng)

    def forward(self, x):
        return self.fc(ops.global_average_pool(x))
