"""Training configuration and its flat ``key = value`` file format."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path

from .datapipe import AugmentConfig
from .neural.model import DEFAULT_ARCH, SIX_LAYER_ARCH, parse_arch


class ConfigError(ValueError):
    """Bad configuration; ``key`` names the offending entry when known."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 32
    batch_size: int = 16
    learning_rate: float = 0.01
    input_size: int = 256
    seed: int = 0
    crop_fraction: float = 0.7
    max_jitter_degrees: float = 10.0
    clahe_tile_rows: int = 8
    clahe_tile_cols: int = 8
    clahe_clip_limit: float = 2.0
    clahe_mode: str = "pre"
    data_dir: str = ""
    n_slices: int = 200
    phantom_size: int = 80
    arch: str = DEFAULT_ARCH
    extra_conv: bool = False
    workers: int = 1

    def __post_init__(self):
        checks = [
            ("epochs", self.epochs >= 1, "must be >= 1"),
            ("batch_size", self.batch_size >= 2, "must be >= 2 (batch norm needs statistics)"),
            ("learning_rate", self.learning_rate > 0 and math.isfinite(self.learning_rate), "must be > 0"),
            ("input_size", self.input_size >= 8, "must be >= 8"),
            ("clahe_tile_rows", self.clahe_tile_rows >= 1, "must be >= 1"),
            ("clahe_tile_cols", self.clahe_tile_cols >= 1, "must be >= 1"),
            ("clahe_clip_limit", self.clahe_clip_limit >= 1.0, "must be >= 1"),
            ("clahe_mode", self.clahe_mode in ("pre", "post", "none"), "must be pre, post or none"),
            ("n_slices", self.n_slices >= 5, "must be >= 5"),
            ("phantom_size", self.phantom_size >= 32, "must be >= 32"),
            ("workers", self.workers >= 1, "must be >= 1"),
        ]
        for key, ok, msg in checks:
            if not ok:
                raise ConfigError(f"{key}: {msg}", key)
        try:
            self.augment
        except ValueError as e:
            raise ConfigError(str(e)) from None
        try:
            parse_arch(self.architecture)
        except ValueError as e:
            raise ConfigError(f"arch: {e}", "arch") from None

    @property
    def augment(self) -> AugmentConfig:
        return AugmentConfig(self.crop_fraction, self.input_size, self.max_jitter_degrees, self.seed)

    @property
    def tile_grid(self) -> tuple[int, int]:
        return (self.clahe_tile_rows, self.clahe_tile_cols)

    @property
    def architecture(self) -> str:
        if self.extra_conv and self.arch == DEFAULT_ARCH:
            return SIX_LAYER_ARCH
        return self.arch

    @property
    def preprocess(self) -> tuple:
        """(tile rows, tile cols, clip limit, crop fraction) for inference;
        a zero tile grid means no equalization."""
        rows, cols = (0, 0) if self.clahe_mode == "none" else self.tile_grid
        return (rows, cols, self.clahe_clip_limit, self.crop_fraction)


DESK = dict(input_size=64, n_slices=200, phantom_size=80)

_KEYS = {f.name: f for f in fields(TrainConfig)}


def _coerce(key, raw: str):
    typ = _KEYS[key].type
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        if typ == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return raw
    except ValueError as e:
        raise ConfigError(f"{key}: {e}", key) from None


def parse_config(text: str, base: dict | None = None) -> TrainConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment; unknown keys are errors."""
    values = dict(base or {})
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}", key)
        values[key] = _coerce(key, raw)
    return TrainConfig(**values)


def load_config(path) -> TrainConfig:
    path = Path(path)
    cfg = parse_config(path.read_text())
    if cfg.data_dir and not Path(cfg.data_dir).is_absolute():
        # relative data paths resolve against the config file
        cfg = dataclasses.replace(cfg, data_dir=str((path.parent / cfg.data_dir).resolve()))
    return cfg


def dump_config(cfg: TrainConfig) -> str:
    return "".join(f"{k} = {getattr(cfg, k)}\n" for k in _KEYS)
