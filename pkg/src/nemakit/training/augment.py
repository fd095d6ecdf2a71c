"""Label-preserving mirror / flip / quarter-turn augmentation."""

from __future__ import annotations

import numpy as np


def augment(image: np.ndarray, seed, mirror: bool = True, flip: bool = True, rotate: bool = True) -> np.ndarray:
    """Randomly mirror, flip and rotate a square (..., H, W) image.

    ``seed`` is an int or a :class:`numpy.random.Generator`. Three draws are
    always consumed (whether or not a toggle is on) so disabling one
    transform does not shift the others.
    """
    if image.shape[-1] != image.shape[-2]:
        raise ValueError(f"augment expects a square image, got {image.shape}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    do_mirror, do_flip = rng.integers(0, 2, size=2)
    quarter_turns = int(rng.integers(0, 4))
    out = image
    if mirror and do_mirror:
        out = out[..., :, ::-1]
    if flip and do_flip:
        out = out[..., ::-1, :]
    if rotate and quarter_turns:
        out = np.rot90(out, quarter_turns, axes=(-2, -1))
    return out if out is image else np.ascontiguousarray(out)


def augment_batch(batch: np.ndarray, rng: np.random.Generator, **toggles) -> np.ndarray:
    return np.stack([augment(img, rng, **toggles) for img in batch])
