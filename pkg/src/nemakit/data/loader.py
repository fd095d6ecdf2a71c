"""Turn a manifest into network-ready arrays."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .imaging import load_image, prepare
from .manifest import DatasetManifest


def load_arrays(
    manifest: DatasetManifest,
    input_size: int,
    indices: Sequence[int] | None = None,
    roi: bool = True,
    median: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``X`` (N, 3, S, S) float32 in [0, 1] and ``y`` (N,) int64."""
    records = manifest.records if indices is None else [manifest.records[i] for i in indices]
    x = np.empty((len(records), 3, input_size, input_size), dtype=np.float32)
    for i, record in enumerate(records):
        x[i] = prepare(load_image(manifest.absolute_path(record)), input_size, roi=roi, median=median)
    y = np.fromiter((r.label for r in records), dtype=np.int64, count=len(records))
    return x, y
