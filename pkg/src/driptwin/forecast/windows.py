"""Sliding-window sequence assembly for supervised forecasting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..store import Dataset


@dataclass(frozen=True)
class WindowSpec:
    """Lookback steps fed to the network and horizon steps it must predict."""

    lookback: int = 60
    horizon: int = 30
    features: int = 5

    def __post_init__(self) -> None:
        if self.lookback < 1 or self.horizon < 1 or self.features < 1:
            raise ValueError("lookback, horizon and features must all be >= 1")

    @property
    def min_rows(self) -> int:
        return self.lookback + self.horizon


def window_count(n_rows: int, spec: WindowSpec) -> int:
    return max(0, n_rows - spec.lookback - spec.horizon + 1)


def make_sequences(ds: Dataset, spec: WindowSpec) -> tuple[np.ndarray, np.ndarray]:
    """All (X, y) pairs: X = rows[s : s+L], y = target[s+L : s+L+F].

    Returns arrays of shape (S, L, features) and (S, F); S may be zero for
    short inputs.
    """
    n = len(ds)
    if ds.features.shape[1] != spec.features:
        raise ValueError(f"dataset has {ds.features.shape[1]} features, spec wants {spec.features}")
    count = window_count(n, spec)
    x = np.empty((count, spec.lookback, spec.features), dtype=np.float64)
    y = np.empty((count, spec.horizon), dtype=np.float64)
    for s in range(count):
        x[s] = ds.features[s:s + spec.lookback]
        y[s] = ds.target[s + spec.lookback:s + spec.lookback + spec.horizon]
    return x, y
