"""Exact backpropagation through time for the forecaster.

The loss whose gradients are produced is the batch MSE: the mean of squared
errors over every sample and horizon step, so duplicating a sample leaves the
gradient unchanged. The dropout mask recorded during the forward pass is
reused, making the pair forward_batch/backward_batch a consistent
differentiable function.
"""

from __future__ import annotations

import numpy as np

from .model import GATE_ORDER, ForwardCache


def backward_batch(y: np.ndarray, y_hat: np.ndarray, params: dict[str, np.ndarray],
                   cache: ForwardCache) -> dict[str, np.ndarray]:
    """Gradients of mean((y_hat - y)^2) with respect to every parameter array."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ValueError(f"target shape {y.shape} does not match prediction {y_hat.shape}")
    batch, horizon = y.shape
    hidden = params["b_i"].shape[0]
    steps = len(cache.gates)

    grads = {name: np.zeros_like(arr) for name, arr in params.items()}

    d_yhat = 2.0 * (y_hat - y) / (batch * horizon)

    # output layer
    grads["W_y"] = d_yhat.T @ cache.a_dense
    grads["b_y"] = d_yhat.sum(axis=0)
    d_a = d_yhat @ params["W_y"]

    # dense ReLU layer
    d_z = d_a * (cache.z_dense > 0.0)
    grads["W_h"] = d_z.T @ cache.h_dropped
    grads["b_h"] = d_z.sum(axis=0)
    d_h = (d_z @ params["W_h"]) * cache.mask

    # recurrence, newest step first
    wu = np.concatenate([params[f"U_{g}"] for g in GATE_ORDER], axis=0)
    d_wx = np.zeros((4 * hidden, cache.x.shape[2]), dtype=np.float64)
    d_wu = np.zeros((4 * hidden, hidden), dtype=np.float64)
    d_b = np.zeros(4 * hidden, dtype=np.float64)
    d_c = np.zeros_like(d_h)
    for t in range(steps - 1, -1, -1):
        i, f, o, g = cache.gates[t]
        c_prev, tanh_c = cache.cells[t]
        h_prev = cache.hs[t]
        x_t = cache.x[:, t, :]

        d_o = d_h * tanh_c
        d_c = d_c + d_h * o * (1.0 - tanh_c * tanh_c)
        d_i = d_c * g
        d_g = d_c * i
        d_f = d_c * c_prev

        d_ai = d_i * i * (1.0 - i)
        d_af = d_f * f * (1.0 - f)
        d_ao = d_o * o * (1.0 - o)
        d_ag = d_g * (1.0 - g * g)
        d_gates = np.concatenate([d_ai, d_af, d_ao, d_ag], axis=1)

        d_wx += d_gates.T @ x_t
        d_wu += d_gates.T @ h_prev
        d_b += d_gates.sum(axis=0)

        d_h = d_gates @ wu
        d_c = d_c * f

    for k, g_name in enumerate(GATE_ORDER):
        grads[f"W_{g_name}"] = d_wx[k * hidden:(k + 1) * hidden]
        grads[f"U_{g_name}"] = d_wu[k * hidden:(k + 1) * hidden]
        grads[f"b_{g_name}"] = d_b[k * hidden:(k + 1) * hidden]
    return grads


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their global L2 norm is at most max_norm.

    Returns the pre-clip norm (useful for diagnostics)."""
    total = 0.0
    for arr in grads.values():
        total += float(np.sum(arr * arr))
    norm = float(np.sqrt(total))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for arr in grads.values():
            arr *= scale
    return norm
