"""INI-style configuration with [sim], [firmware], [controller], [train] and
[gateway] sections; every key has a documented default and unknown keys fail
loudly so typos cannot silently fall back."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Union

from .controller import ControllerConfig
from .forecast.training import TrainConfig
from .forecast.windows import WindowSpec
from .sim import SimConfig


@dataclass
class FirmwareConfig:
    send_interval: float = 2.0
    # Single-threshold compatibility: when set, all three pots boot with it.
    threshold: int = -1


@dataclass
class GatewayConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    token: str = "local-dev-token"
    event_buffer: int = 256
    time_scale: float = 1.0   # sim seconds advanced per wall second in serve


@dataclass
class TrainSettings:
    lookback: int = 60
    horizon: int = 30
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    hidden: int = 64
    dense: int = 32
    dropout: float = 0.2
    clip_norm: float = 5.0
    seed: int = 0

    def window_spec(self) -> WindowSpec:
        return WindowSpec(lookback=self.lookback, horizon=self.horizon, features=5)

    def train_config(self, epochs: Optional[int] = None, seed: Optional[int] = None) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs if epochs is None else epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            clip_norm=self.clip_norm,
            hidden=self.hidden,
            dense=self.dense,
            dropout=self.dropout,
            seed=self.seed if seed is None else seed,
        )


@dataclass
class AppConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    firmware: FirmwareConfig = field(default_factory=FirmwareConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    train: TrainSettings = field(default_factory=TrainSettings)
    gateway: GatewayConfig = field(default_factory=GatewayConfig)


_TUPLE_FIELDS = {"m0", "thresholds"}


def load_config(path: Optional[Union[str, Path]] = None) -> AppConfig:
    """Defaults, overridden by the file when one is given."""
    cfg = AppConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(Path(path))
    if not read:
        raise ValueError(f"config file not found: {path}")

    sections = {
        "sim": cfg.sim,
        "firmware": cfg.firmware,
        "controller": cfg.controller,
        "train": cfg.train,
        "gateway": cfg.gateway,
    }
    for section in parser.sections():
        if section not in sections:
            raise ValueError(f"unknown config section [{section}]")
        target = sections[section]
        known = {f.name: f for f in fields(target)}
        for key, raw in parser.items(section):
            if key not in known:
                raise ValueError(f"unknown key {key!r} in section [{section}]")
            setattr(target, key, _coerce(raw, getattr(target, key), key))
    if cfg.firmware.threshold >= 0:
        cfg.controller.thresholds = (cfg.firmware.threshold,) * 3
    cfg.sim.validate()
    return cfg


def _coerce(raw: str, current, key: str):
    if key in _TUPLE_FIELDS:
        parts = [p.strip() for p in raw.split(",")]
        elem = type(current[0])
        values = tuple(elem(p) for p in parts)
        if len(values) != len(current):
            raise ValueError(f"{key} expects {len(current)} comma-separated values")
        return values
    if isinstance(current, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key} expects a boolean, got {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    return raw
