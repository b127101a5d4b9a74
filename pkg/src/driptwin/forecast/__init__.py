"""Per-pot soil-moisture forecasting: scaling, windowing, the recurrent network,
exact gradients, training, and checkpoints."""

from .checkpoint import load_model, save_model
from .gradients import backward_batch, clip_gradients
from .model import ForecastModel, forward_batch, init_params, lstm_cell
from .scaling import MinMaxScaler
from .training import AdamOptimizer, EvalReport, EpochStats, TrainConfig, evaluate, mae, mse, train
from .windows import WindowSpec, make_sequences, window_count

__all__ = [
    "AdamOptimizer",
    "EvalReport",
    "EpochStats",
    "ForecastModel",
    "MinMaxScaler",
    "TrainConfig",
    "WindowSpec",
    "backward_batch",
    "clip_gradients",
    "evaluate",
    "forward_batch",
    "init_params",
    "load_model",
    "lstm_cell",
    "mae",
    "make_sequences",
    "mse",
    "save_model",
    "train",
    "window_count",
]
