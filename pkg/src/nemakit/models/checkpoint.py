"""Binary weight files.

Layout (all integers little-endian u32)::

    b"NEMA" | version | count | count x (name_len | utf-8 name | rank | dims... | float32 data)
"""

from __future__ import annotations

import os
import struct
from typing import BinaryIO, Iterable

import numpy as np

from .layers import Module

MAGIC = b"NEMA"
VERSION = 1
_U32 = struct.Struct("<I")


class CheckpointError(ValueError):
    pass


def write_tensors(fh: BinaryIO, items: Iterable[tuple[str, np.ndarray]]) -> None:
    items = list(items)
    fh.write(MAGIC)
    fh.write(_U32.pack(VERSION))
    fh.write(_U32.pack(len(items)))
    for name, array in items:
        encoded = name.encode("utf-8")
        fh.write(_U32.pack(len(encoded)))
        fh.write(encoded)
        fh.write(_U32.pack(array.ndim))
        for d in array.shape:
            fh.write(_U32.pack(d))
        fh.write(np.ascontiguousarray(array, dtype="<f4").tobytes())


def read_tensors(path: str | os.PathLike) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    view = memoryview(blob)
    pos = 0

    def take(n: int) -> memoryview:
        nonlocal pos
        if pos + n > len(view):
            raise CheckpointError(f"{path}: truncated checkpoint at byte {pos}")
        chunk = view[pos : pos + n]
        pos += n
        return chunk

    def u32() -> int:
        return _U32.unpack(take(4))[0]

    if bytes(take(4)) != MAGIC:
        raise CheckpointError(f"{path}: bad magic bytes, not a NEMA checkpoint")
    version = u32()
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(u32()):
        try:
            name = bytes(take(u32())).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointError(f"{path}: corrupt parameter name") from exc
        shape = tuple(u32() for _ in range(u32()))
        count = int(np.prod(shape, dtype=np.int64))
        tensors[name] = np.frombuffer(take(4 * count), dtype="<f4").reshape(shape).copy()
    if pos != len(view):
        raise CheckpointError(f"{path}: {len(view) - pos} trailing bytes")
    return tensors


def save_weights(model: Module, path: str | os.PathLike) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        write_tensors(fh, ((name, p.data) for name, p in model.named_parameters()))
    os.replace(tmp, path)


def load_weights(model: Module, path: str | os.PathLike, partial: bool = False) -> list[str]:
    """Copy stored tensors into ``model`` by name.

    Returns the model parameter names that were not present in the file
    (always empty unless ``partial``). A name present in both with different
    dimensions is an error either way.
    """
    stored = read_tensors(path)
    params = dict(model.named_parameters())
    for name, p in params.items():
        if name in stored and stored[name].shape != p.shape:
            raise CheckpointError(
                f"{path}: parameter {name!r} has dimensions {stored[name].shape} in file, model expects {p.shape}"
            )
    unmatched = [name for name in params if name not in stored]
    if unmatched and not partial:
        preview = ", ".join(unmatched[:5])
        raise CheckpointError(f"{path}: {len(unmatched)} model parameters missing from file ({preview} ...)")
    for name, p in params.items():
        if name in stored:
            p.data[...] = stored[name]
    return unmatched
