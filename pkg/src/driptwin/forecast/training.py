"""Minibatch training with adaptive-moment updates and best-on-validation selection."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .gradients import backward_batch, clip_gradients
from .model import (
    DEFAULT_DENSE,
    DEFAULT_DROPOUT,
    DEFAULT_HIDDEN,
    TARGET_FEATURE,
    ForecastModel,
    forward_batch,
    init_params,
)
from .scaling import MinMaxScaler
from .windows import WindowSpec

logger = logging.getLogger(__name__)


def mse(y: np.ndarray, y_hat: np.ndarray) -> float:
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {y_hat.shape}")
    if y.size == 0:
        raise ValueError("mse needs at least one element")
    return float(np.mean((y - y_hat) ** 2))


def mae(y: np.ndarray, y_hat: np.ndarray) -> float:
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {y_hat.shape}")
    if y.size == 0:
        raise ValueError("mae needs at least one element")
    return float(np.mean(np.abs(y - y_hat)))


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 5.0
    hidden: int = DEFAULT_HIDDEN
    dense: int = DEFAULT_DENSE
    dropout: float = DEFAULT_DROPOUT
    seed: int = 0

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be > 0")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError("dropout must be in [0, 1)")


class AdamOptimizer:
    """First/second-moment update with bias correction."""

    def __init__(self, params: dict[str, np.ndarray], cfg: TrainConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        cfg = self.cfg
        self.t += 1
        bc1 = 1.0 - cfg.beta1 ** self.t
        bc2 = 1.0 - cfg.beta2 ** self.t
        for k in params:
            g = grads[k]
            self.m[k] = cfg.beta1 * self.m[k] + (1.0 - cfg.beta1) * g
            self.v[k] = cfg.beta2 * self.v[k] + (1.0 - cfg.beta2) * (g * g)
            m_hat = self.m[k] / bc1
            v_hat = self.v[k] / bc2
            params[k] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: Optional[float]

    def to_dict(self) -> dict:
        return {"epoch": self.epoch, "train_loss": self.train_loss, "val_loss": self.val_loss}


def train(train_xy: tuple[np.ndarray, np.ndarray],
          val_xy: Optional[tuple[np.ndarray, np.ndarray]],
          cfg: TrainConfig,
          scaler: MinMaxScaler,
          spec: WindowSpec,
          pot: int) -> tuple[ForecastModel, list[EpochStats]]:
    """Fit one pot's model on pre-scaled windows.

    Runs `cfg.epochs` passes of shuffled minibatches; after each epoch the
    validation loss is recorded and the parameters with the lowest validation
    loss so far are kept (the last epoch wins when there is no validation
    data). Deterministic for a fixed config and seed.
    """
    cfg.validate()
    x_train, y_train = train_xy
    if x_train.shape[0] == 0:
        raise ValueError("training set has no windows")
    has_val = val_xy is not None and val_xy[0].shape[0] > 0

    rng = np.random.default_rng(cfg.seed)
    params = init_params(cfg.hidden, spec.features, cfg.dense, spec.horizon, rng)
    optimizer = AdamOptimizer(params, cfg)

    history: list[EpochStats] = []
    best_params = _copy_params(params)
    best_val = np.inf
    n = x_train.shape[0]

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            y_hat, cache = forward_batch(xb, params, training=True,
                                         dropout_rate=cfg.dropout, rng=rng)
            batch_loss = mse(yb, y_hat)
            if not np.isfinite(batch_loss):
                raise RuntimeError(
                    f"non-finite training loss at epoch {epoch}, batch {start // cfg.batch_size}; "
                    f"reduce the learning rate or check the input scaling"
                )
            loss_sum += batch_loss * len(idx)
            grads = backward_batch(yb, y_hat, params, cache)
            clip_gradients(grads, cfg.clip_norm)
            optimizer.step(params, grads)
        train_loss = loss_sum / n

        val_loss: Optional[float] = None
        if has_val:
            val_hat, _ = forward_batch(val_xy[0], params, training=False)
            val_loss = mse(val_xy[1], val_hat)
            if not np.isfinite(val_loss):
                raise RuntimeError(f"non-finite validation loss at epoch {epoch}")
            if val_loss < best_val:
                best_val = val_loss
                best_params = _copy_params(params)
        history.append(EpochStats(epoch=epoch, train_loss=train_loss, val_loss=val_loss))
        logger.debug("pot %d epoch %d train %.6f val %s", pot, epoch, train_loss,
                     "n/a" if val_loss is None else f"{val_loss:.6f}")

    final_params = best_params if has_val and cfg.epochs > 0 else params
    model = ForecastModel(params=final_params, scaler=scaler, spec=spec, pot=pot,
                          hidden=cfg.hidden, dense=cfg.dense, dropout_rate=cfg.dropout)
    return model, history


@dataclass(frozen=True)
class EvalReport:
    mae_scaled: float
    mae_counts: float
    n_windows: int


def evaluate(model: ForecastModel, test_xy: tuple[np.ndarray, np.ndarray]) -> EvalReport:
    """MAE over held-out windows in scaled space, plus the same error in raw counts."""
    x_test, y_test = test_xy
    if x_test.shape[0] == 0:
        raise ValueError("evaluation set has no windows")
    y_hat = model.predict(x_test)
    scaled = mae(y_test, y_hat)
    span = float(model.scaler.span_[TARGET_FEATURE])
    return EvalReport(mae_scaled=scaled, mae_counts=scaled * span, n_windows=x_test.shape[0])


def _copy_params(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: v.copy() for k, v in params.items()}
