"""Pipeline configuration: a small YAML file with paths, analysis knobs, seed.

Relative paths are resolved against the config file's directory so a generated
world ships with a config that works from anywhere. Validation of path
existence happens per command (a command only checks what it consumes).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .iodata import FULL


class ConfigError(ValueError):
    """Invalid or incomplete pipeline configuration."""


DEFAULT_CONTEXT_WINDOWS = [1, 5, 10, 20, 50, 100, FULL]


@dataclass
class PipelineConfig:
    # inputs
    tensors_dir: str | None = None
    responses: str | None = None
    electrodes: str | None = None
    benchmarks: str | None = None
    raw_dir: str | None = None
    raw_electrodes: str | None = None
    word_timings: str | None = None
    # outputs / run control
    output_dir: str = "out"
    seed: int = 0
    jobs: int = 1
    # encoding
    pca_k: int = 500
    window_ms: float = 100.0
    n_folds: int = 10
    lambda_lo: float = 1e-2
    lambda_hi: float = 1e4
    lambda_num: int = 13
    lambda_grid: list[float] | None = None
    # hierarchy
    bin_width_mm: float = 10.0
    bin_width_ms: float = 40.0
    sliding_window_n: int = 50
    degenerate_com_range: float = 1.0
    max_lag_ms: float = 400.0
    # similarity
    kernel: str = "rbf"
    bandwidth_scale: float = 1.0
    cka_max_words: int = 2000
    group_size: int = 5
    # context sweep
    context_windows: list = field(default_factory=lambda: list(DEFAULT_CONTEXT_WINDOWS))
    # signal
    raw_fs_hz: float = 1000.0
    band_lo_hz: float = 70.0
    band_hi_hz: float = 150.0
    envelope_fs_hz: float = 100.0
    # statistics
    alpha: float = 0.05
    bootstrap_n: int = 1000
    bootstrap_level: float = 0.95

    def __post_init__(self):
        positive = [
            "pca_k", "window_ms", "n_folds", "lambda_lo", "lambda_hi", "lambda_num",
            "bin_width_mm", "bin_width_ms", "sliding_window_n", "max_lag_ms",
            "bandwidth_scale", "cka_max_words", "group_size", "raw_fs_hz",
            "band_lo_hz", "band_hi_hz", "envelope_fs_hz", "bootstrap_n", "jobs",
        ]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.lambda_lo > self.lambda_hi:
            raise ConfigError("lambda_lo must not exceed lambda_hi")
        if self.kernel not in ("rbf", "linear"):
            raise ConfigError(f"kernel must be 'rbf' or 'linear', got {self.kernel!r}")
        if not 0 < self.alpha < 1 or not 0 < self.bootstrap_level < 1:
            raise ConfigError("alpha and bootstrap_level must lie in (0, 1)")
        if self.degenerate_com_range < 0:
            raise ConfigError("degenerate_com_range must be non-negative")
        cleaned = []
        for w in self.context_windows:
            if w == FULL:
                cleaned.append(FULL)
            elif isinstance(w, int) and not isinstance(w, bool) and w >= 1:
                cleaned.append(w)
            else:
                raise ConfigError(f"context window must be a positive integer or '{FULL}', got {w!r}")
        self.context_windows = cleaned
        if self.lambda_grid is not None:
            grid = [float(x) for x in self.lambda_grid]
            if not grid or any(x <= 0 for x in grid):
                raise ConfigError("lambda_grid must be a non-empty list of positive values")
            self.lambda_grid = grid

    @property
    def lambdas(self) -> np.ndarray:
        if self.lambda_grid is not None:
            return np.sort(np.asarray(self.lambda_grid, dtype=np.float64))
        return np.logspace(np.log10(self.lambda_lo), np.log10(self.lambda_hi), self.lambda_num)

    def require(self, *names: str) -> None:
        """Check that the named input paths are configured and exist."""
        for name in names:
            value = getattr(self, name)
            if value is None:
                raise ConfigError(f"config is missing the '{name}' path")
            if not Path(value).exists():
                raise ConfigError(f"{name} path does not exist: {value}")

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            out[f.name] = getattr(self, f.name)
        return out


_SECTION_KEYS = {
    "paths": (
        "tensors_dir", "responses", "electrodes", "benchmarks",
        "raw_dir", "raw_electrodes", "word_timings",
    ),
    "run": ("output_dir", "seed", "jobs"),
}
_PATH_KEYS = set(_SECTION_KEYS["paths"]) | {"output_dir"}


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            raw = yaml.safe_load(f) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    flat: dict = {}
    known = {f.name for f in fields(PipelineConfig)}
    for key, value in raw.items():
        if key in ("paths", "run", "analysis"):
            if not isinstance(value, dict):
                raise ConfigError(f"{path}: section '{key}' must be a mapping")
            flat.update(value)
        else:
            flat[key] = value
    unknown = set(flat) - known
    if unknown:
        raise ConfigError(f"{path}: unknown config keys: {sorted(unknown)}")
    base = path.parent
    for key in _PATH_KEYS:
        if flat.get(key) is not None:
            flat[key] = str((base / str(flat[key])).resolve()) if not Path(str(flat[key])).is_absolute() else str(flat[key])
    try:
        return PipelineConfig(**flat)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def dump_config(cfg: PipelineConfig, path) -> None:
    d = cfg.as_dict()
    doc = {
        "paths": {k: d[k] for k in _SECTION_KEYS["paths"] if d[k] is not None},
        "run": {k: d[k] for k in _SECTION_KEYS["run"]},
        "analysis": {
            k: v
            for k, v in d.items()
            if k not in _PATH_KEYS and k not in ("seed", "jobs") and v is not None
        },
    }
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(doc, f, sort_keys=True)
