"""Training configuration: defaults, JSON round-trip and validation."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

CONFIG_VERSION = 1
SEED_ENV = "NEMAKIT_SEED"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    config_version: int = CONFIG_VERSION
    model: str = "nemanet"
    width_divisor: int = 1
    input_size: int = 224
    batch_size: int = 32
    epochs: int = 100
    momentum: float = 0.9
    weight_decay_start: float = 1e-5
    weight_decay_end: float = 1e-6
    # triangular cycle between lr_base and lr_peak; with clr_decay the whole
    # waveform is scaled by a linear envelope ending at lr_final / lr_peak
    lr_base: float = 6e-5
    lr_peak: float = 1e-3
    lr_final: float = 6e-6
    clr_step_size: int = 100
    clr_decay: bool = True
    seed: int = 0
    folds: int = 5
    holdout_fraction: float = 0.2
    augment_mirror: bool = True
    augment_flip: bool = True
    augment_rotate: bool = True
    roi_crop: bool = True
    median_filter: bool = False
    bn_momentum: float = 0.1
    bn_epsilon: float = 1e-5
    eval_batch_size: int = 64

    def __post_init__(self) -> None:
        problems = []
        if self.config_version != CONFIG_VERSION:
            problems.append(f"config_version {self.config_version} is not {CONFIG_VERSION}")
        if self.batch_size < 1:
            problems.append(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0 <= self.momentum < 1:
            problems.append(f"momentum must be in [0, 1), got {self.momentum}")
        for name in ("lr_base", "lr_peak", "lr_final"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be > 0, got {getattr(self, name)}")
        if self.lr_base >= self.lr_peak:
            problems.append(f"lr_base {self.lr_base} must be below lr_peak {self.lr_peak}")
        if self.clr_step_size < 1:
            problems.append(f"clr_step_size must be >= 1, got {self.clr_step_size}")
        if self.epochs < 0:
            problems.append(f"epochs must be >= 0, got {self.epochs}")
        if min(self.weight_decay_start, self.weight_decay_end) < 0:
            problems.append("weight decay must be >= 0")
        if self.folds < 1:
            problems.append(f"folds must be >= 1, got {self.folds}")
        if not 0 < self.holdout_fraction < 1:
            problems.append(f"holdout_fraction must be in (0, 1), got {self.holdout_fraction}")
        if self.width_divisor < 1:
            problems.append(f"width_divisor must be >= 1, got {self.width_divisor}")
        if problems:
            raise ConfigError("; ".join(problems))

    def replace(self, **changes: Any) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "TrainConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)

    def weight_decay(self, epoch: int) -> float:
        """Linear interpolation over epochs 1..E from the start to the end value."""
        if self.epochs <= 1:
            return self.weight_decay_start
        frac = (epoch - 1) / (self.epochs - 1)
        return self.weight_decay_start + (self.weight_decay_end - self.weight_decay_start) * frac


# Desk-scale preset for the synthetic fixture: 64 px inputs, a quarter-width
# NemaNet and the shorter 30-epoch budget.
SYNTHETIC_PRESET = dict(input_size=64, width_divisor=4, epochs=30)


def default_config(preset: str = "full") -> TrainConfig:
    if preset == "full":
        return TrainConfig()
    if preset == "synthetic":
        return TrainConfig(**SYNTHETIC_PRESET)
    raise ConfigError(f"unknown preset {preset!r}; choose 'full' or 'synthetic'")


def apply_env(config: TrainConfig, environ: dict[str, str] | None = None) -> TrainConfig:
    """Honor the seed override from the environment."""
    environ = os.environ if environ is None else environ
    raw = environ.get(SEED_ENV)
    if raw is None or raw == "":
        return config
    try:
        return config.replace(seed=int(raw))
    except ValueError:
        raise ConfigError(f"{SEED_ENV}={raw!r} is not an integer") from None
