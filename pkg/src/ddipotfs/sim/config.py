"""Experiment configuration: the `SimConfig` model and its file loaders.

Two file formats are accepted. Flat ``key = value`` text (``#`` starts a
comment, list values are comma separated) is the primary one; files ending in
``.yaml``/``.yml`` are read as a YAML mapping with the same keys.
"""

from __future__ import annotations

import math
import os
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ddipotfs.detectors import DETECTOR_NAMES
from ddipotfs.detectors.ddip import DdipConfig
from ddipotfs.exceptions import ConfigError, ParameterError
from ddipotfs.link.dd_frame import Constellation

_LIST_KEYS = frozenset({"snr_db_list", "detectors"})
_YAML_SUFFIXES = frozenset({".yaml", ".yml"})


def _env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    if value is None:
        return default
    try:
        return int(value)
    except ValueError:
        return default


def default_output_dir() -> Path:
    return Path(os.getenv("DDIPOTFS_OUTPUT_DIR") or Path.cwd() / "results")


class SimConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    M: int = 12
    """Delay bins (subcarriers)."""
    N: int = 7
    """Doppler bins (OTFS symbols per frame)."""
    P: int = 6
    """Propagation paths per channel realization."""
    l_max: int | None = None
    """Largest delay index; follows M - 1 when left unset."""
    k_max: int = 3
    """Largest absolute Doppler index."""
    snr_db_list: list[float] = Field(default_factory=lambda: [10.0, 12.5, 15.0, 17.5])
    """SNR points in dB; ``inf`` runs the noiseless diagnostic."""
    frames: int = 1000
    """Monte Carlo frames per SNR point."""
    detectors: list[str] = Field(default_factory=lambda: list(DETECTOR_NAMES))
    """Detectors to run, any of mmse, mmse-bpic, ddip-bpic."""
    T: int = 10
    """BPIC iterations."""
    W: int = 30
    """D-DIP stopping window."""
    epsilon: float = 1e-3
    """D-DIP stopping threshold on the windowed output variance."""
    lr: float = 0.01
    """D-DIP Adam learning rate."""
    ddip_cap: int = 500
    """Hard cap on D-DIP iterations."""
    c: float | None = None
    """D-DIP output scale; the constellation's largest per-dimension amplitude when unset."""
    modulation_order: int = 4
    """Square QAM order Q."""
    seed: int = 0
    """Root seed; frame f always draws from the same stream."""
    workers: int = Field(default_factory=lambda: _env_int("DDIPOTFS_WORKERS", 1))
    """Threads used to run the frames of one SNR point."""
    delta_f: float = 15e3
    """Subcarrier spacing in Hz (reported metadata)."""
    carrier_frequency: float = 10e9
    """Carrier frequency in Hz (reported metadata)."""
    loss_trace: bool = False
    """Write the D-DIP loss trace of `trial` runs."""

    @field_validator("detectors")
    @classmethod
    def _known_detectors(cls, value: list[str]) -> list[str]:
        if not value:
            raise ValueError("detectors must name at least one detector")
        unknown = [name for name in value if name not in DETECTOR_NAMES]
        if unknown:
            raise ValueError(f"unknown detector {unknown[0]!r}; known: {', '.join(DETECTOR_NAMES)}")
        return list(dict.fromkeys(value))

    @model_validator(mode="after")
    def _check_bounds(self) -> SimConfig:
        if self.M < 1 or self.N < 1:
            raise ValueError(f"M and N must be >= 1 (got M = {self.M}, N = {self.N})")
        l_max = self.delay_spread
        if not 0 <= l_max <= self.M - 1:
            raise ValueError(f"l_max = {l_max} violates 0 ≤ l_max ≤ M−1 = {self.M - 1}")
        if not 0 <= self.k_max <= self.N // 2:
            raise ValueError(f"k_max = {self.k_max} violates k_max ≤ ⌊N/2⌋ = {self.N // 2}")
        n_pairs = (l_max + 1) * (2 * self.k_max + 1)
        if not 1 <= self.P <= n_pairs:
            raise ValueError(f"P = {self.P} violates 1 ≤ P ≤ (l_max+1)(2k_max+1) = {n_pairs}")
        if self.frames < 1:
            raise ValueError(f"frames = {self.frames} violates frames ≥ 1")
        if not self.snr_db_list:
            raise ValueError("snr_db_list must hold at least one SNR")
        if self.T < 1:
            raise ValueError(f"T = {self.T} violates T ≥ 1")
        if self.W < 1 or self.ddip_cap < self.W:
            raise ValueError(f"ddip_cap = {self.ddip_cap} and W = {self.W} violate 1 ≤ W ≤ ddip_cap")
        if self.epsilon <= 0 or self.lr <= 0:
            raise ValueError("epsilon and lr must be positive")
        if self.c is not None and not 0 < self.c < math.inf:
            raise ValueError(f"c = {self.c} violates 0 < c < ∞")
        if self.seed < 0:
            raise ValueError(f"seed = {self.seed} violates seed ≥ 0")
        if self.workers < 1:
            raise ValueError(f"workers = {self.workers} violates workers ≥ 1")
        try:
            Constellation.square_qam(self.modulation_order)
        except ParameterError as exc:
            raise ValueError(str(exc)) from exc
        return self

    @property
    def delay_spread(self) -> int:
        """Effective l_max."""
        return self.M - 1 if self.l_max is None else self.l_max

    @property
    def symbols_per_frame(self) -> int:
        return self.M * self.N

    def constellation(self) -> Constellation:
        return Constellation.square_qam(self.modulation_order)

    def ddip_config(self) -> DdipConfig:
        c = self.c if self.c is not None else self.constellation().c
        return DdipConfig(window=self.W, threshold=self.epsilon, lr=self.lr, cap=self.ddip_cap, c=c)


def _first_error(exc: ValidationError) -> ConfigError:
    error = exc.errors()[0]
    key = ".".join(str(part) for part in error.get("loc", ())) or None
    message = str(error.get("msg", exc)).removeprefix("Value error, ")
    if key and error.get("type") == "extra_forbidden":
        message = f"unknown config key: {key}"
    elif key:
        message = f"{key}: {message}"
    return ConfigError(message, key=key)


def build_config(values: dict[str, Any]) -> SimConfig:
    """Validate a mapping of config keys, reporting the first violation as a ConfigError."""
    for key in values:
        if key not in SimConfig.model_fields:
            raise ConfigError(f"unknown config key: {key}", key=str(key))
    try:
        return SimConfig.model_validate(values)
    except ValidationError as exc:
        raise _first_error(exc) from None


def parse_flat_config(text: str) -> dict[str, Any]:
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if key not in SimConfig.model_fields:
            raise ConfigError(f"unknown config key: {key}", key=key)
        if key in _LIST_KEYS:
            values[key] = [item.strip() for item in value.split(",") if item.strip()]
        elif value.lower() in {"none", ""}:
            values[key] = None
        else:
            values[key] = value
    return values


def load_config(path: Path | str) -> SimConfig:
    """Load and validate a configuration file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() in _YAML_SUFFIXES:
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: YAML config must be a mapping of keys to values")
        values = {str(key): value for key, value in data.items()}
    else:
        values = parse_flat_config(text)
    return build_config(values)


def apply_overrides(cfg: SimConfig, *, seed: int | None = None, detectors: list[str] | None = None, **extra: Any) -> SimConfig:
    """Merge command-line overrides into `cfg` and validate the result again."""
    values = cfg.model_dump(exclude_unset=True)
    if seed is not None:
        values["seed"] = seed
    if detectors is not None:
        values["detectors"] = detectors
    values.update({key: value for key, value in extra.items() if value is not None})
    return build_config(values)
