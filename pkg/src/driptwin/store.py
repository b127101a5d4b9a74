"""Append-only telemetry log, CSV export, and dataset assembly for the forecasters."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from .core import SensorSnapshot, soil_channels_for_pot
from .protocol import encode_telemetry, parse_telemetry

FEATURE_NAMES = ("temperature_c", "humidity_pct", "rain", "flow_lpm", "zone_moisture_avg")
CSV_HEADER = ["ts", "temp", "hum", "rain", "flow",
              "soil0", "soil1", "soil2", "soil3", "soil4", "soil5",
              "relay0", "relay1", "relay2", "mode"]

DEFAULT_SPLIT = (0.70, 0.15, 0.15)


class TelemetryLog:
    """Time-ordered snapshot record, optionally durably backed by a JSONL file.

    Appends require strictly increasing timestamps; each appended frame is
    written and flushed before the call returns, so a reopened log reproduces
    the in-memory sequence exactly.
    """

    def __init__(self, path: Optional[Union[str, Path]] = None, readonly: bool = False):
        self._snapshots: list[SensorSnapshot] = []
        self._path = Path(path) if path is not None else None
        self._readonly = readonly
        self._fh = None
        if self._path is not None:
            if self._path.exists():
                with self._path.open("r", encoding="utf-8") as fh:
                    for lineno, line in enumerate(fh, start=1):
                        if line.strip() == "":
                            continue
                        try:
                            snap = parse_telemetry(line)
                        except ValueError as e:
                            raise ValueError(f"{self._path}:{lineno}: {e}") from None
                        self._check_monotone(snap)
                        self._snapshots.append(snap)
            elif readonly:
                raise FileNotFoundError(f"telemetry log not found: {self._path}")
            if not readonly:
                self._fh = self._path.open("a", encoding="utf-8")

    @classmethod
    def read(cls, path: Union[str, Path]) -> "TelemetryLog":
        """Load an existing log without holding it open for appends."""
        return cls(path, readonly=True)

    def _check_monotone(self, snap: SensorSnapshot) -> None:
        if self._snapshots and snap.timestamp <= self._snapshots[-1].timestamp:
            raise ValueError(
                f"timestamps must be strictly increasing: "
                f"{snap.timestamp} after {self._snapshots[-1].timestamp}"
            )

    def append(self, snap: SensorSnapshot) -> None:
        if self._readonly:
            raise RuntimeError("log was opened read-only")
        self._check_monotone(snap)
        snap.validate()
        if self._fh is not None:
            self._fh.write(encode_telemetry(snap) + "\n")
            self._fh.flush()
        self._snapshots.append(snap)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "TelemetryLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __len__(self) -> int:
        return len(self._snapshots)

    def __iter__(self) -> Iterator[SensorSnapshot]:
        return iter(self._snapshots)

    def __getitem__(self, idx):
        return self._snapshots[idx]

    @property
    def snapshots(self) -> tuple[SensorSnapshot, ...]:
        return tuple(self._snapshots)

    def last(self) -> Optional[SensorSnapshot]:
        return self._snapshots[-1] if self._snapshots else None

    def range(self, ts_from: Optional[int] = None, ts_to: Optional[int] = None) -> list[SensorSnapshot]:
        """Snapshots with ts in [ts_from, ts_to] (either bound optional)."""
        lo = ts_from if ts_from is not None else -math.inf
        hi = ts_to if ts_to is not None else math.inf
        return [s for s in self._snapshots if lo <= s.timestamp <= hi]

    def export_csv(self, path: Union[str, Path]) -> None:
        """Spreadsheet-style export; unreadable DHT cells are left empty."""
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for s in self._snapshots:
                writer.writerow([
                    s.timestamp,
                    "" if s.temperature_c is None else s.temperature_c,
                    "" if s.humidity_pct is None else s.humidity_pct,
                    1 if s.rain_wet else 0,
                    float(s.flow_lpm),
                    *s.soil_adc,
                    *(int(r) for r in s.relay),
                    int(s.mode),
                ])


@dataclass(frozen=True)
class Dataset:
    """Per-pot training matrix: one row per frame, five feature columns, and the
    pot's probe-pair average as the prediction target (also feature 4)."""

    features: np.ndarray  # (N, 5) float64
    target: np.ndarray    # (N,) float64
    pot: int

    def __len__(self) -> int:
        return self.features.shape[0]


def to_dataset(log: Union[TelemetryLog, Sequence[SensorSnapshot]], pot: int) -> Dataset:
    """Assemble the feature matrix for one pot; unreadable DHT rows carry NaN."""
    snaps = list(log)
    if not snaps:
        raise ValueError("cannot build a dataset from an empty log")
    a, b = soil_channels_for_pot(pot)
    rows = np.empty((len(snaps), 5), dtype=np.float64)
    for i, s in enumerate(snaps):
        zone = (s.soil_adc[a] + s.soil_adc[b]) / 2.0
        rows[i, 0] = np.nan if s.temperature_c is None else float(s.temperature_c)
        rows[i, 1] = np.nan if s.humidity_pct is None else float(s.humidity_pct)
        rows[i, 2] = 1.0 if s.rain_wet else 0.0
        rows[i, 3] = float(s.flow_lpm)
        rows[i, 4] = zone
    return Dataset(features=rows, target=rows[:, 4].copy(), pot=pot)


def split_sizes(n: int, ratios: Sequence[float] = DEFAULT_SPLIT) -> tuple[int, int, int]:
    """(train, val, test) row counts: floor of the first two ratios, remainder last.

    Ratios are interpreted as the decimals they print as (0.70 means exactly
    7/10); naive float multiplication misfloors e.g. 0.70*90.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    n_train = int(n * Fraction(str(ratios[0])))
    n_val = int(n * Fraction(str(ratios[1])))
    if n_train + n_val > n:
        raise ValueError("split ratios exceed 1")
    return n_train, n_val, n - n_train - n_val


def split(ds: Dataset, ratios: Sequence[float] = DEFAULT_SPLIT) -> tuple[Dataset, Dataset, Dataset]:
    """Chronological three-way split (no shuffling: targets are future values)."""
    n = len(ds)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    n_train, n_val, _ = split_sizes(n, ratios)
    cuts = (0, n_train, n_train + n_val, n)
    parts = []
    for lo, hi in zip(cuts, cuts[1:]):
        parts.append(Dataset(features=ds.features[lo:hi], target=ds.target[lo:hi], pot=ds.pot))
    return parts[0], parts[1], parts[2]
