"""Per-feature min-max scaling with statistics frozen from the training split."""

from __future__ import annotations

import numpy as np


class MinMaxScaler:
    """Affine map of each feature column to [0, 1] using training extrema.

    A constant feature (max == min) maps to 0 everywhere; its inverse returns
    the constant. Fit only on training rows so later splits stay unseen.
    """

    def __init__(self) -> None:
        self.data_min_: np.ndarray | None = None
        self.data_max_: np.ndarray | None = None

    @property
    def fitted(self) -> bool:
        return self.data_min_ is not None

    @property
    def span_(self) -> np.ndarray:
        self._require_fitted()
        return self.data_max_ - self.data_min_

    def fit(self, rows: np.ndarray) -> "MinMaxScaler":
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise ValueError("fit expects a non-empty 2-D array of rows")
        self.data_min_ = rows.min(axis=0)
        self.data_max_ = rows.max(axis=0)
        return self

    def transform(self, rows: np.ndarray) -> np.ndarray:
        self._require_fitted()
        rows = np.asarray(rows, dtype=np.float64)
        span = self.span_
        safe = np.where(span == 0.0, 1.0, span)
        out = (rows - self.data_min_) / safe
        if np.any(span == 0.0):
            out = np.where(span == 0.0, 0.0, out)
        return out

    def inverse_transform(self, rows: np.ndarray) -> np.ndarray:
        self._require_fitted()
        rows = np.asarray(rows, dtype=np.float64)
        return rows * self.span_ + self.data_min_

    def transform_feature(self, values: np.ndarray, index: int) -> np.ndarray:
        """Scale a 1-D slice of one feature column."""
        self._require_fitted()
        span = self.span_[index]
        if span == 0.0:
            return np.zeros_like(np.asarray(values, dtype=np.float64))
        return (np.asarray(values, dtype=np.float64) - self.data_min_[index]) / span

    def inverse_transform_feature(self, values: np.ndarray, index: int) -> np.ndarray:
        self._require_fitted()
        return np.asarray(values, dtype=np.float64) * self.span_[index] + self.data_min_[index]

    def _require_fitted(self) -> None:
        if not self.fitted:
            raise RuntimeError("scaler used before fit()")
