"""Dataset scanning, ROI preprocessing and the synthetic fixture."""

from .imaging import NoObjectError, load_image, object_mask, otsu_threshold, prepare, preprocess_roi, resize_normalize, roi_box
from .loader import load_arrays
from .manifest import CANONICAL_CLASSES, DatasetError, DatasetManifest, Record, scan_dataset
from .synthetic import BODY_PLANS, generate_synthetic_dataset

__all__ = [
    "BODY_PLANS",
    "CANONICAL_CLASSES",
    "DatasetError",
    "DatasetManifest",
    "NoObjectError",
    "Record",
    "generate_synthetic_dataset",
    "load_arrays",
    "load_image",
    "object_mask",
    "otsu_threshold",
    "prepare",
    "preprocess_roi",
    "resize_normalize",
    "roi_box",
    "scan_dataset",
]
