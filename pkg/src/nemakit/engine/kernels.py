"""Kernel backend selection.

The compiled extension (``_ckernels``) is used when it was built; otherwise
the numpy implementations in ``_pykernels`` are used. Setting
``NEMAKIT_KERNELS=python`` forces the fallback.
"""

import importlib
import os
from types import ModuleType

from . import _pykernels

_NAMES = ("im2col", "col2im", "maxpool_forward", "maxpool_backward")


def load_backend(name: str) -> ModuleType:
    if name == "python":
        return _pykernels
    if name == "cython":
        return importlib.import_module("nemakit.engine._ckernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends() -> list[str]:
    names = ["python"]
    try:
        load_backend("cython")
    except ImportError:
        pass
    else:
        names.append("cython")
    return names


def _select() -> tuple[str, ModuleType]:
    requested = os.environ.get("NEMAKIT_KERNELS", "").strip().lower()
    if requested == "python":
        return "python", _pykernels
    try:
        return "cython", load_backend("cython")
    except ImportError:
        if requested == "cython":
            raise
        return "python", _pykernels


BACKEND, _impl = _select()

im2col = _impl.im2col
col2im = _impl.col2im
maxpool_forward = _impl.maxpool_forward
maxpool_backward = _impl.maxpool_backward
