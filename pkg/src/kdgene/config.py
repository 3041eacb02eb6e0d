"""Run configuration: flat key=value files, derived seeds, grid enumeration."""

from __future__ import annotations

import itertools
import zlib
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .cells import CELL_KINDS, OUTPUT_MODES
from .models import MODEL_KINDS

# Published search grids; values outside them are accepted with a warning.
LAMBDA_GRID = (0.001, 0.01, 0.05, 0.1, 0.2, 0.5)
LEARNING_RATE_GRID = (0.01, 0.03, 0.05, 0.1)
BATCH_SIZE_GRID = (128, 256, 512, 1024)


@dataclass
class TrainConfig:
    batch_size: int = 256
    learning_rate: float = 0.05
    reg_lambda: float = 0.01
    epochs: int = 50
    d_e: int = 64
    d_r: int = 32
    model: str = "kdgene"
    cell: str = "lstm"
    output_mode: str = "standard"
    seed: int = 0

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.reg_lambda < 0:
            raise ValueError(f"reg_lambda must be >= 0, got {self.reg_lambda}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.d_e < 1 or self.d_r < 1:
            raise ValueError(f"embedding dims must be >= 1, got d_e={self.d_e} d_r={self.d_r}")
        if self.model not in MODEL_KINDS:
            raise ValueError(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        if self.cell not in CELL_KINDS:
            raise ValueError(f"cell must be one of {CELL_KINDS}, got {self.cell!r}")
        if self.output_mode not in OUTPUT_MODES:
            raise ValueError(f"output_mode must be one of {OUTPUT_MODES}, got {self.output_mode!r}")
        if self.model in ("cp_n3", "distmult") and self.d_r != self.d_e:
            raise ValueError(f"{self.model} requires d_r == d_e, got {self.d_r} != {self.d_e}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")

    def as_dict(self) -> dict:
        return asdict(self)


_FIELD_TYPES = {f.name: f.type for f in fields(TrainConfig)}


def _convert(key: str, value: str):
    kind = _FIELD_TYPES[key]
    if kind in (int, "int"):
        return int(value)
    if kind in (float, "float"):
        return float(value)
    return value


def apply_overrides(config: TrainConfig, overrides: dict[str, str]) -> TrainConfig:
    """Apply string key=value overrides; unknown keys are an error."""
    values = config.as_dict()
    for key, value in overrides.items():
        if key not in _FIELD_TYPES:
            valid = ", ".join(sorted(_FIELD_TYPES))
            raise ValueError(f"unknown config key {key!r}; valid keys: {valid}")
        values[key] = _convert(key, value)
    out = TrainConfig(**values)
    out.validate()
    return out


def parse_config(text: str) -> TrainConfig:
    """Parse flat key=value lines ('#' comments, blank lines ignored)."""
    overrides: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        overrides[key.strip()] = value.strip()
    return apply_overrides(TrainConfig(), overrides)


def load_config(path: str | Path) -> TrainConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def config_text(config: TrainConfig) -> str:
    return "".join(f"{k}={v}\n" for k, v in config.as_dict().items())


def grid_warnings(config: TrainConfig) -> list[str]:
    """Non-fatal notes for hyperparameters outside the usual search grids."""
    notes = []
    if config.reg_lambda not in LAMBDA_GRID:
        notes.append(f"reg_lambda={config.reg_lambda} is outside the usual grid {LAMBDA_GRID}")
    return notes


def expand_grid(base: TrainConfig, grid: dict[str, list]) -> list[TrainConfig]:
    """Enumerate configs over the cartesian product of the given axes."""
    keys = list(grid)
    configs = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        values = base.as_dict()
        for key, value in zip(keys, combo):
            if key not in _FIELD_TYPES:
                valid = ", ".join(sorted(_FIELD_TYPES))
                raise ValueError(f"unknown config key {key!r}; valid keys: {valid}")
            values[key] = value
        cfg = TrainConfig(**values)
        cfg.validate()
        configs.append(cfg)
    return configs


def derived_rng(seed: int, label: str, *indices: int) -> np.random.Generator:
    """Labeled child generator of a master seed.

    Labels in use: "param-init", "epoch-shuffle" (with epoch index),
    "fold-shuffle", "gradcheck" (with instance index).
    """
    key = zlib.crc32(label.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([seed, key, *indices]))
