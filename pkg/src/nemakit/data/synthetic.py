"""Procedural worm-on-slide images standing in for microscope captures.

Each class is a distinct body plan (centerline shape, body thickness, tail
taper, coil count) on a background whose texture frequency is also class
specific; every factor gets intra-class jitter and every image a random
rotation, so orientation carries no label information.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .manifest import DatasetManifest, scan_dataset


@dataclass(frozen=True)
class BodyPlan:
    name: str
    shape: str  # "wave", "spiral", "arc"
    length: float  # centerline length as a fraction of the image side
    amplitude: float  # wave amplitude (fraction of side) / arc or spiral turns
    cycles: float  # wave cycles along the body
    thickness: float  # body half-width as a fraction of the side
    taper: float  # 0 = blunt, 1 = tail narrows to a point
    texture_cycles: float  # background grating cycles per image side


BODY_PLANS = (
    BodyPlan("c0_sinuous", "wave", 0.85, 0.10, 2.5, 0.022, 0.2, 3.0),
    BodyPlan("c1_coiled", "spiral", 1.60, 1.6, 0.0, 0.028, 0.3, 5.0),
    BodyPlan("c2_c_shaped", "arc", 0.95, 0.55, 0.0, 0.055, 0.1, 7.0),
    BodyPlan("c3_straight_tapered", "wave", 0.80, 0.015, 0.5, 0.040, 0.95, 9.5),
    BodyPlan("c4_reniform", "arc", 0.70, 0.85, 0.0, 0.045, 0.8, 12.0),
)


def _centerline(plan: BodyPlan, rng: np.random.Generator, n: int = 160) -> np.ndarray:
    """Unit-side centerline points (n, 2), roughly centered on the origin."""
    t = np.linspace(0.0, 1.0, n)
    jitter = lambda scale: 1.0 + scale * rng.uniform(-1, 1)  # noqa: E731
    length = plan.length * jitter(0.1)
    if plan.shape == "wave":
        cycles = plan.cycles * jitter(0.15)
        amp = plan.amplitude * jitter(0.2)
        phase = rng.uniform(0, 2 * np.pi)
        x = (t - 0.5) * length
        y = amp * np.sin(2 * np.pi * cycles * t + phase)
    elif plan.shape == "arc":
        turns = plan.amplitude * jitter(0.1)
        theta = 2 * np.pi * turns * (t - 0.5)
        radius = length / (2 * np.pi * turns)
        x, y = radius * np.cos(theta), radius * np.sin(theta)
    elif plan.shape == "spiral":
        turns = plan.amplitude * jitter(0.1)
        theta = 2 * np.pi * turns * t
        r_outer = 0.30 * jitter(0.1)
        r = r_outer * (1.0 - 0.55 * t)
        x, y = r * np.cos(theta), r * np.sin(theta)
    else:
        raise ValueError(f"unknown body shape {plan.shape!r}")
    pts = np.stack([x, y], axis=1)
    pts -= pts.mean(axis=0)
    return pts


def render(plan: BodyPlan, size: int, rng: np.random.Generator) -> np.ndarray:
    """Render one (size, size, 3) uint8 image of ``plan``."""
    pts = _centerline(plan, rng)
    angle = rng.uniform(0, 2 * np.pi)
    rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    pts = pts @ rot.T
    extent = np.abs(pts).max()
    if extent > 0.40:
        pts *= 0.40 / extent
    pts = (pts + 0.5 + rng.uniform(-0.04, 0.04, size=2)) * size

    t = np.linspace(0.0, 1.0, len(pts))
    half_width = plan.thickness * size * (1.0 + 0.12 * rng.uniform(-1, 1))
    # head is rounded, tail narrows according to taper
    profile = np.sqrt(np.clip(t / 0.06, 0, 1)) * (1.0 - plan.taper * np.clip((t - 0.6) / 0.4, 0, 1))
    radius = np.maximum(half_width * profile, 0.35)

    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) + 0.5
    grid = np.stack([xx.ravel(), yy.ravel()], axis=1)
    d = np.sqrt(((grid[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)) - radius[None, :]
    body = np.clip(0.5 - d.min(axis=1), 0.0, 1.0).reshape(size, size)

    cycles = plan.texture_cycles * (1.0 + 0.08 * rng.uniform(-1, 1))
    tex_angle = rng.uniform(0, np.pi)
    phase = rng.uniform(0, 2 * np.pi)
    wave = np.sin(2 * np.pi * cycles * (xx * np.cos(tex_angle) + yy * np.sin(tex_angle)) / size + phase)
    background = 0.18 + 0.07 * wave + rng.normal(0.0, 0.025, size=(size, size))
    brightness = 0.82 + 0.06 * rng.uniform(-1, 1)
    gray = background * (1.0 - body) + brightness * body
    tint = np.array([1.0, 0.93, 0.80])
    rgb = np.clip(gray[..., None] * tint, 0.0, 1.0)
    return np.round(rgb * 255).astype(np.uint8)


# coarser labelling of the same renderer: body-shape family only
FAMILIES = {"wave": (0, 3), "arc": (2, 4), "spiral": (1,)}
TASKS = ("species", "family")


def generate_synthetic_dataset(
    root: str | os.PathLike,
    classes: int = 5,
    per_class: int = 100,
    image_size: int = 64,
    seed: int = 0,
    task: str = "species",
) -> DatasetManifest:
    """Write ``root/<class>/<nnnn>.png`` images and return their manifest.

    ``task="family"`` labels images by body-shape family (wave, arc,
    spiral), alternating between the member body plans; it serves as a
    related but different task for pretraining.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}; choose from {TASKS}")
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    if not 1 <= classes <= len(BODY_PLANS):
        raise ValueError(f"classes must be in [1, {len(BODY_PLANS)}], got {classes}")
    if image_size < 16:
        raise ValueError(f"image_size must be >= 16, got {image_size}")
    if task == "species":
        layout = {plan.name: (i,) for i, plan in enumerate(BODY_PLANS[:classes])}
    else:
        layout = dict(FAMILIES)
    root = Path(root)
    try:
        root.mkdir(parents=True, exist_ok=True)
        for class_index, (name, members) in enumerate(layout.items()):
            class_dir = root / name
            class_dir.mkdir(exist_ok=True)
            rng = np.random.default_rng([seed, TASKS.index(task), class_index])
            for i in range(per_class):
                plan = BODY_PLANS[members[i % len(members)]]
                Image.fromarray(render(plan, image_size, rng)).save(class_dir / f"{i:04d}.png", optimize=False)
    except OSError as exc:
        raise OSError(f"cannot write synthetic dataset under {root}: {exc}") from exc
    return scan_dataset(root)
