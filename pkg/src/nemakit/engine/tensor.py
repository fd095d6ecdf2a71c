"""Dense tensors with a reverse-mode tape.

Every op in :mod:`nemakit.engine.ops` produces a new :class:`Tensor` that
remembers its parents and a closure mapping the upstream gradient to one
gradient per parent. :meth:`Tensor.backward` walks that record in reverse
topological order.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

_DEFAULT_DTYPE = np.float32
_GRAD_ENABLED = True
_BRANCH_TAPE: Optional["BranchTape"] = None

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def default_dtype() -> np.dtype:
    return np.dtype(_DEFAULT_DTYPE)


def set_default_dtype(dtype) -> None:
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported dtype {dtype}; use float32 or float64")
    _DEFAULT_DTYPE = dtype.type


@contextlib.contextmanager
def precision(dtype) -> Iterator[None]:
    """Temporarily switch the dtype used for newly created tensors."""
    previous = _DEFAULT_DTYPE
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class BranchTape:
    """Discrete forward decisions (ReLU masks, max-pool winners) in op order."""

    def __init__(self) -> None:
        self.decisions: list[np.ndarray] = []
        self.cursor = 0
        self.replaying = False


@contextlib.contextmanager
def record_branches() -> Iterator[BranchTape]:
    global _BRANCH_TAPE
    previous, tape = _BRANCH_TAPE, BranchTape()
    _BRANCH_TAPE = tape
    try:
        yield tape
    finally:
        _BRANCH_TAPE = previous


@contextlib.contextmanager
def replay_branches(tape: BranchTape) -> Iterator[BranchTape]:
    """Re-run a forward pass on the pieces chosen when ``tape`` was recorded.

    Inside this context the piecewise-linear ops reuse the recorded
    decisions, so the computed function is the smooth piece through the
    recording point.
    """
    global _BRANCH_TAPE
    previous = _BRANCH_TAPE
    tape.cursor, tape.replaying = 0, True
    _BRANCH_TAPE = tape
    try:
        yield tape
        if tape.cursor != len(tape.decisions):
            raise RuntimeError(f"replayed {tape.cursor} of {len(tape.decisions)} recorded branch decisions")
    finally:
        tape.replaying = False
        _BRANCH_TAPE = previous


def branch_decision(decision: np.ndarray) -> np.ndarray:
    """Pass ``decision`` through, record it, or substitute the recorded one."""
    tape = _BRANCH_TAPE
    if tape is None:
        return decision
    if not tape.replaying:
        tape.decisions.append(decision)
        return decision
    if tape.cursor >= len(tape.decisions):
        raise RuntimeError("forward pass made more branch decisions than were recorded")
    recorded = tape.decisions[tape.cursor]
    if recorded.shape != decision.shape:
        raise RuntimeError(f"branch decision shape {decision.shape} differs from recorded {recorded.shape}")
    tape.cursor += 1
    return recorded


class Tensor:
    """An n-dimensional float array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            dtype = _DEFAULT_DTYPE
        self.data: np.ndarray = np.ascontiguousarray(data, dtype=dtype)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Optional[BackwardFn] = None
        self.op: str = "leaf"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, op={self.op})"

    @classmethod
    def from_op(
        cls, data: np.ndarray, parents: Sequence["Tensor"], backward: BackwardFn, op: str
    ) -> "Tensor":
        out = cls(data, dtype=data.dtype)
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
            out.op = op
        return out

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for every reachable leaf.

        ``grad`` is the upstream gradient; it defaults to ones, which for a
        scalar loss is the usual seed.
        """
        if not self.requires_grad:
            raise RuntimeError("backward() called on a tensor that does not require grad")
        if grad is None:
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=self.dtype)
            if grad.shape != self.shape:
                raise ValueError(f"seed gradient shape {grad.shape} != tensor shape {self.shape}")

        order = _topological_order(self)
        pending: dict[int, np.ndarray] = {id(self): grad}
        for node in reversed(order):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            parent_grads = node._backward(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in pending:
                    pending[key] = pending[key] + pg
                else:
                    pending[key] = pg
            # saved intermediates are released once consumed
            node._backward = None
            node._parents = ()


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen and parent.requires_grad:
                stack.append((parent, False))
    return order


class Parameter(Tensor):
    """A named model tensor. Non-trainable parameters never receive gradient."""

    __slots__ = ("name", "trainable")

    def __init__(self, data, trainable: bool = True, name: str = "", dtype=None):
        super().__init__(data, requires_grad=trainable, dtype=dtype)
        self.trainable = trainable
        self.name = name

    def __repr__(self) -> str:
        kind = "trainable" if self.trainable else "frozen"
        return f"Parameter({self.name!r}, shape={self.shape}, {kind})"
