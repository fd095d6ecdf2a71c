"""Image loading, object-of-interest cropping and network-input conversion."""

from __future__ import annotations

import os

import numpy as np
from PIL import Image, ImageFilter
from scipy import ndimage

MIN_AREA_FRACTION = 1e-4
ROI_MARGIN = 0.10


class NoObjectError(ValueError):
    pass


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Read PNG/JPEG as an (H, W, 3) uint8 RGB array."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8).copy()


def to_gray(image: np.ndarray) -> np.ndarray:
    rgb = image.astype(np.float64)
    return rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114


def otsu_threshold(gray: np.ndarray, bins: int = 256) -> float:
    """Threshold maximizing the between-class variance of a 256-bin histogram."""
    lo, hi = float(gray.min()), float(gray.max())
    if hi <= lo:
        return hi
    hist, edges = np.histogram(gray, bins=bins, range=(lo, hi))
    centers = (edges[:-1] + edges[1:]) / 2
    w0 = np.cumsum(hist).astype(np.float64)
    w1 = w0[-1] - w0
    m0 = np.cumsum(hist * centers)
    mu0 = np.divide(m0, w0, out=np.zeros_like(m0), where=w0 > 0)
    mu1 = np.divide(m0[-1] - m0, w1, out=np.zeros_like(m0), where=w1 > 0)
    between = w0 * w1 * (mu0 - mu1) ** 2
    return float(edges[int(np.argmax(between[:-1])) + 1])


def object_mask(image: np.ndarray) -> np.ndarray:
    """Largest 4-connected component on the minority side of the Otsu threshold.

    The object is assumed to cover less of the frame than the background,
    which makes the rule work for both bright-field (dark object) and
    dark-field (bright object) captures.
    """
    gray = to_gray(image)
    t = otsu_threshold(gray)
    above = gray > t
    if not above.any() or above.all():
        raise NoObjectError("no object detected")
    fg = above if above.sum() <= above.size / 2 else ~above
    labels, count = ndimage.label(fg)
    if count == 0:
        raise NoObjectError("no object detected")
    areas = np.bincount(labels.ravel())[1:]
    best = int(np.argmax(areas))
    if areas[best] < max(1, MIN_AREA_FRACTION * gray.size):
        raise NoObjectError("no object detected")
    return labels == best + 1


def roi_box(mask: np.ndarray, margin: float = ROI_MARGIN) -> tuple[int, int, int, int]:
    """Square (top, left, bottom, right) box around the mask.

    The box is centered on the mask centroid, sized to contain the bounding
    box plus ``margin`` of its longer side, then shifted (or, for frames too
    small, shrunk) to stay inside the image.
    """
    h, w = mask.shape
    ys, xs = np.nonzero(mask)
    cy, cx = ys.mean(), xs.mean()
    y0, y1, x0, x1 = ys.min(), ys.max() + 1, xs.min(), xs.max() + 1
    half = max(cy - y0, y1 - cy, cx - x0, x1 - cx) + margin * max(y1 - y0, x1 - x0)
    side = int(np.ceil(2 * half))
    side_y, side_x = min(side, h), min(side, w)
    top = int(round(cy - side_y / 2))
    left = int(round(cx - side_x / 2))
    top = min(max(top, 0), h - side_y)
    left = min(max(left, 0), w - side_x)
    return top, left, top + side_y, left + side_x


def preprocess_roi(image: np.ndarray, margin: float = ROI_MARGIN) -> np.ndarray:
    """Crop the image to a square around its dominant object."""
    top, left, bottom, right = roi_box(object_mask(image), margin)
    return image[top:bottom, left:right].copy()


def median_filter(image: np.ndarray) -> np.ndarray:
    return np.asarray(Image.fromarray(image).filter(ImageFilter.MedianFilter(3)))


def resize_normalize(image: np.ndarray, target: int) -> np.ndarray:
    """Bilinear resize to target x target; returns float32 (3, target, target) in [0, 1], RGB order."""
    if target < 8:
        raise ValueError(f"target size must be >= 8, got {target}")
    img = Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8)).convert("RGB")
    if img.size != (target, target):
        img = img.resize((target, target), Image.Resampling.BILINEAR)
    arr = np.asarray(img, dtype=np.float32) / np.float32(255.0)
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def prepare(image: np.ndarray, target: int, roi: bool = True, median: bool = False) -> np.ndarray:
    """The full per-image chain: optional median filter, ROI crop, resize/normalize."""
    if median:
        image = median_filter(image)
    if roi:
        image = preprocess_roi(image)
    return resize_normalize(image, target)
