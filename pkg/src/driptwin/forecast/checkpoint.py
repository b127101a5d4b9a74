"""Self-describing model checkpoints; loading reproduces predictions bit-exactly."""

from __future__ import annotations

from pathlib import Path
from typing import Union

import numpy as np

from .model import ForecastModel, param_shapes
from .scaling import MinMaxScaler
from .windows import WindowSpec

FORMAT_VERSION = 1


def save_model(model: ForecastModel, path: Union[str, Path]) -> None:
    """Write shapes, window spec, scaler statistics and parameters to one file."""
    meta = np.array([
        FORMAT_VERSION,
        model.pot,
        model.spec.lookback,
        model.spec.horizon,
        model.spec.features,
        model.hidden,
        model.dense,
    ], dtype=np.int64)
    arrays = {
        "meta": meta,
        "dropout_rate": np.array([model.dropout_rate], dtype=np.float64),
        "scaler_min": np.asarray(model.scaler.data_min_, dtype=np.float64),
        "scaler_max": np.asarray(model.scaler.data_max_, dtype=np.float64),
    }
    for name, arr in model.params.items():
        arrays[f"param_{name}"] = np.asarray(arr, dtype=np.float64)
    with Path(path).open("wb") as fh:
        np.savez(fh, **arrays)


def load_model(path: Union[str, Path]) -> ForecastModel:
    with np.load(Path(path), allow_pickle=False) as data:
        meta = data["meta"]
        if int(meta[0]) != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {int(meta[0])}")
        pot = int(meta[1])
        spec = WindowSpec(lookback=int(meta[2]), horizon=int(meta[3]), features=int(meta[4]))
        hidden, dense = int(meta[5]), int(meta[6])

        scaler = MinMaxScaler()
        scaler.data_min_ = data["scaler_min"].copy()
        scaler.data_max_ = data["scaler_max"].copy()

        expected = param_shapes(hidden, spec.features, dense, spec.horizon)
        params: dict[str, np.ndarray] = {}
        for name, shape in expected.items():
            arr = data[f"param_{name}"]
            if arr.shape != shape:
                raise ValueError(f"checkpoint parameter {name} has shape {arr.shape}, expected {shape}")
            params[name] = arr.copy()

        return ForecastModel(
            params=params,
            scaler=scaler,
            spec=spec,
            pot=pot,
            hidden=hidden,
            dense=dense,
            dropout_rate=float(data["dropout_rate"][0]),
        )
