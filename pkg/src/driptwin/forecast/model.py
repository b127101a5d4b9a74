"""Gated recurrent forecaster built directly on numpy arrays.

The network is: recurrent cell unrolled over the lookback window, inverted
dropout on the final hidden state (training only), one ReLU hidden layer, and
a linear output of `horizon` values. Everything is float64 so the analytic
gradients can be checked sharply against finite differences.

Parameters live in a flat dict keyed per gate: ``W_<g>`` maps inputs,
``U_<g>`` maps the previous hidden state, ``b_<g>`` is the bias, for gates
``i`` (input), ``f`` (forget), ``o`` (output), ``g`` (candidate). ``W_h/b_h``
is the ReLU hidden layer and ``W_y/b_y`` the output layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .scaling import MinMaxScaler
from .windows import WindowSpec

GATE_ORDER = ("i", "f", "o", "g")

DEFAULT_HIDDEN = 64
DEFAULT_DENSE = 32
DEFAULT_DROPOUT = 0.2

TARGET_FEATURE = 4  # zone moisture average column


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign to stay overflow-free for large |x|.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def param_shapes(hidden: int, features: int, dense: int, horizon: int) -> dict[str, tuple]:
    shapes: dict[str, tuple] = {}
    for g in GATE_ORDER:
        shapes[f"W_{g}"] = (hidden, features)
        shapes[f"U_{g}"] = (hidden, hidden)
        shapes[f"b_{g}"] = (hidden,)
    shapes["W_h"] = (dense, hidden)
    shapes["b_h"] = (dense,)
    shapes["W_y"] = (horizon, dense)
    shapes["b_y"] = (horizon,)
    return shapes


def init_params(hidden: int, features: int, dense: int, horizon: int,
                rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Uniform +-1/sqrt(fan_in) weights; forget-gate bias 1.0 (keeps early memory
    alive against vanishing gradients), all other biases zero."""
    params: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(hidden, features, dense, horizon).items():
        if name.startswith("b_"):
            params[name] = np.zeros(shape, dtype=np.float64)
        else:
            bound = 1.0 / np.sqrt(shape[1])
            params[name] = rng.uniform(-bound, bound, size=shape)
    params["b_f"][:] = 1.0
    return params


def lstm_cell(x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray,
              params: dict[str, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """One recurrent step for a single input vector; returns (h, c)."""
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    hidden = params["b_i"].shape[0]
    if x.shape != (params["W_i"].shape[1],) or h_prev.shape != (hidden,) or c_prev.shape != (hidden,):
        raise ValueError("lstm_cell: input shapes do not match the parameters")
    i = sigmoid(params["W_i"] @ x + params["U_i"] @ h_prev + params["b_i"])
    f = sigmoid(params["W_f"] @ x + params["U_f"] @ h_prev + params["b_f"])
    o = sigmoid(params["W_o"] @ x + params["U_o"] @ h_prev + params["b_o"])
    g = np.tanh(params["W_g"] @ x + params["U_g"] @ h_prev + params["b_g"])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


def _stack_gates(params: dict[str, np.ndarray]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    wx = np.concatenate([params[f"W_{g}"] for g in GATE_ORDER], axis=0)
    wu = np.concatenate([params[f"U_{g}"] for g in GATE_ORDER], axis=0)
    b = np.concatenate([params[f"b_{g}"] for g in GATE_ORDER], axis=0)
    return wx, wu, b


@dataclass
class ForwardCache:
    """Per-step activations kept for backpropagation through time."""

    x: np.ndarray                 # (B, L, features)
    gates: list                   # per step: (i, f, o, g)
    cells: list                   # per step: (c_prev, tanh_c)
    hs: list                      # h_0 .. h_L, each (B, hidden)
    mask: np.ndarray              # dropout mask applied to h_L, (B, hidden)
    h_dropped: np.ndarray         # (B, hidden)
    z_dense: np.ndarray           # (B, dense) pre-activation
    a_dense: np.ndarray           # (B, dense)


def forward_batch(x: np.ndarray, params: dict[str, np.ndarray], *,
                  training: bool = False,
                  dropout_rate: float = 0.0,
                  rng: Optional[np.random.Generator] = None,
                  mask: Optional[np.ndarray] = None,
                  ) -> tuple[np.ndarray, ForwardCache]:
    """Unrolled forward pass over a batch (B, L, features) -> (B, horizon).

    Dropout is inverted and only active when training; pass an explicit mask
    to reuse one (the backward pass and gradient checks rely on that).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError("forward_batch expects (batch, steps, features)")
    batch, steps, _ = x.shape
    hidden = params["b_i"].shape[0]
    wx, wu, b = _stack_gates(params)

    h = np.zeros((batch, hidden), dtype=np.float64)
    c = np.zeros((batch, hidden), dtype=np.float64)
    gates, cells, hs = [], [], [h]
    for t in range(steps):
        a = x[:, t, :] @ wx.T + h @ wu.T + b
        ai, af, ao, ag = (a[:, k * hidden:(k + 1) * hidden] for k in range(4))
        i = sigmoid(ai)
        f = sigmoid(af)
        o = sigmoid(ao)
        g = np.tanh(ag)
        c_prev = c
        c = f * c_prev + i * g
        tanh_c = np.tanh(c)
        h = o * tanh_c
        gates.append((i, f, o, g))
        cells.append((c_prev, tanh_c))
        hs.append(h)

    if mask is None:
        if training and dropout_rate > 0.0:
            if rng is None:
                raise ValueError("training forward with dropout needs an rng")
            keep = 1.0 - dropout_rate
            mask = (rng.random((batch, hidden)) < keep).astype(np.float64) / keep
        else:
            mask = np.ones((batch, hidden), dtype=np.float64)
    h_dropped = hs[-1] * mask

    z_dense = h_dropped @ params["W_h"].T + params["b_h"]
    a_dense = relu(z_dense)
    y_hat = a_dense @ params["W_y"].T + params["b_y"]
    cache = ForwardCache(x=x, gates=gates, cells=cells, hs=hs, mask=mask,
                         h_dropped=h_dropped, z_dense=z_dense, a_dense=a_dense)
    return y_hat, cache


@dataclass
class ForecastModel:
    """Everything needed to predict one pot: parameters, scaler, window spec."""

    params: dict[str, np.ndarray]
    scaler: MinMaxScaler
    spec: WindowSpec
    pot: int
    hidden: int = DEFAULT_HIDDEN
    dense: int = DEFAULT_DENSE
    dropout_rate: float = DEFAULT_DROPOUT

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Inference on scaled windows; deterministic (dropout disabled)."""
        single = x.ndim == 2
        if single:
            x = x[None, :, :]
        y_hat, _ = forward_batch(x, self.params, training=False)
        return y_hat[0] if single else y_hat

    def predict_counts(self, x: np.ndarray) -> np.ndarray:
        """Inference plus inverse scaling back to raw ADC counts."""
        return self.scaler.inverse_transform_feature(self.predict(x), TARGET_FEATURE)
