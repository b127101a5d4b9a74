"""Operator entry points: run the closed-loop simulation, train and evaluate
per-pot forecasters, serve the gateway, or replay a recorded log."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional

from .config import AppConfig, load_config
from .controller import ControllerConfig
from .engine import ClosedLoop
from .forecast.checkpoint import load_model, save_model
from .forecast.training import evaluate, train as train_model
from .forecast.windows import make_sequences
from .protocol import encode_telemetry
from .store import Dataset, TelemetryLog, split, to_dataset

logger = logging.getLogger(__name__)


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driptwin",
                                     description="Digital twin of a three-pot drip-irrigation rig.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run the closed loop and record telemetry")
    p_sim.add_argument("--config", type=Path, default=None)
    p_sim.add_argument("--duration", type=float, required=True, help="sim seconds")
    p_sim.add_argument("--seed", type=int, default=None, help="overrides [sim] seed")
    p_sim.add_argument("--out", type=Path, required=True, help="telemetry log (jsonl)")
    p_sim.add_argument("--csv", type=Path, default=None, help="also export a CSV copy")
    p_sim.set_defaults(func=cmd_simulate)

    p_train = sub.add_parser("train", help="fit one pot's forecaster from a log")
    p_train.add_argument("--log", type=Path, required=True)
    p_train.add_argument("--pot", type=int, required=True, choices=(1, 2, 3),
                         help="pot number (1-3)")
    p_train.add_argument("--config", type=Path, default=None)
    p_train.add_argument("--epochs", type=int, default=None, help="overrides [train] epochs")
    p_train.add_argument("--seed", type=int, default=None, help="overrides [train] seed")
    p_train.add_argument("--out", type=Path, required=True, help="model checkpoint path")
    p_train.add_argument("--history-out", type=Path, default=None,
                         help="write the loss history as JSON")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="report held-out MAE for a checkpoint")
    p_eval.add_argument("--model", type=Path, required=True)
    p_eval.add_argument("--log", type=Path, required=True)
    p_eval.set_defaults(func=cmd_eval)

    p_serve = sub.add_parser("serve", help="run the loop plus the HTTP gateway")
    p_serve.add_argument("--config", type=Path, default=None)
    p_serve.add_argument("--models", type=Path, default=None,
                         help="directory with model_pot1..3 checkpoints")
    p_serve.add_argument("--port", type=int, default=None, help="overrides [gateway] port")
    p_serve.add_argument("--time-scale", type=float, default=None,
                         help="sim seconds per wall second")
    p_serve.add_argument("--ui", type=Path, default=None,
                         help="dashboard directory to host at /ui (default: ./frontend if present)")
    p_serve.set_defaults(func=cmd_serve)

    p_replay = sub.add_parser("replay", help="re-emit a recorded log to stdout")
    p_replay.add_argument("--log", type=Path, required=True)
    p_replay.add_argument("--speed", type=float, default=0.0,
                          help="sim seconds per wall second; 0 = no pacing")
    p_replay.set_defaults(func=cmd_replay)

    return parser


def _load(args) -> AppConfig:
    return load_config(getattr(args, "config", None))


def cmd_simulate(args) -> int:
    cfg = _load(args)
    if args.seed is not None:
        cfg.sim.seed = args.seed
    if args.out.exists():
        args.out.unlink()
    with TelemetryLog(args.out) as log:
        loop = ClosedLoop(cfg.sim, ctrl_cfg=cfg.controller, log=log,
                          send_interval=cfg.firmware.send_interval)
        summary = loop.run(args.duration)
        if args.csv is not None:
            log.export_csv(args.csv)
    report = summary.to_dict()
    print(f"simulated {args.duration:g} s ({report['ticks']} ticks), "
          f"{report['frames']} telemetry frames -> {args.out}")
    for pot in range(3):
        print(f"  pot_{pot + 1}: water {report['water_l'][pot]:.2f} L, "
              f"relay duty {report['relay_duty'][pot] * 100:.2f} %, "
              f"moisture [{report['moisture_min'][pot]:.3f}, {report['moisture_max'][pot]:.3f}]")
    print(f"  total water {report['water_l_total']:.2f} L, rain ticks {report['rain_ticks']}, "
          f"clamp events {report['clamp_events']}")
    return 0


def _prepare_splits(ds: Dataset, settings) -> tuple:
    """Chronological split, scale on train only, window each part."""
    from .forecast.scaling import MinMaxScaler

    spec = settings.window_spec()
    train_ds, val_ds, test_ds = split(ds)
    scaler = MinMaxScaler().fit(train_ds.features)

    def windows(part: Dataset):
        scaled = Dataset(features=scaler.transform(part.features),
                         target=scaler.transform_feature(part.target, 4), pot=part.pot)
        return make_sequences(scaled, spec)

    return spec, scaler, windows(train_ds), windows(val_ds), windows(test_ds)


def cmd_train(args) -> int:
    cfg = _load(args)
    settings = cfg.train
    spec = settings.window_spec()
    log = TelemetryLog.read(args.log)
    if len(log) < spec.min_rows:
        raise ValueError(f"log has {len(log)} rows; training needs >= {spec.min_rows} rows "
                         f"(lookback {spec.lookback} + horizon {spec.horizon})")
    pot = args.pot - 1
    ds = to_dataset(log, pot)
    spec, scaler, train_xy, val_xy, test_xy = _prepare_splits(ds, settings)
    if train_xy[0].shape[0] == 0:
        raise ValueError("training split is too short to form a single window; "
                         "record a longer log")

    train_cfg = settings.train_config(epochs=args.epochs, seed=args.seed)
    started = time.monotonic()
    model, history = train_model(train_xy, val_xy, train_cfg, scaler, spec, pot)
    elapsed = time.monotonic() - started

    save_model(model, args.out)
    if args.history_out is not None:
        args.history_out.write_text(
            json.dumps([h.to_dict() for h in history], indent=2) + "\n", encoding="utf-8")

    print(f"trained pot_{args.pot} for {len(history)} epochs "
          f"({train_xy[0].shape[0]} train / {val_xy[0].shape[0]} val windows, {elapsed:.1f} s)")
    if history:
        best = min((h for h in history if h.val_loss is not None),
                   key=lambda h: h.val_loss, default=None)
        last = history[-1]
        print(f"  final train MSE {last.train_loss:.6f}"
              + (f", best val MSE {best.val_loss:.6f} (epoch {best.epoch})" if best else ""))
    if test_xy[0].shape[0] > 0:
        report = evaluate(model, test_xy)
        print(f"  test MAE {report.mae_scaled:.4f} normalized "
              f"({report.mae_counts:.1f} ADC counts, {report.n_windows} windows)")
    print(f"  checkpoint -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    model = load_model(args.model)
    log = TelemetryLog.read(args.log)
    spec = model.spec
    if len(log) < spec.min_rows:
        raise ValueError(f"log has {len(log)} rows; evaluation needs >= {spec.min_rows} rows")
    ds = to_dataset(log, model.pot)
    _, _, test_ds = split(ds)
    scaled = Dataset(features=model.scaler.transform(test_ds.features),
                     target=model.scaler.transform_feature(test_ds.target, 4), pot=model.pot)
    test_xy = make_sequences(scaled, spec)
    if test_xy[0].shape[0] == 0:
        raise ValueError("test split is too short to form a single window")
    report = evaluate(model, test_xy)
    print(f"pot_{model.pot + 1}: test MAE {report.mae_scaled:.4f} normalized, "
          f"{report.mae_counts:.1f} ADC counts over {report.n_windows} windows")
    return 0


def load_models_dir(models_dir: Optional[Path]) -> dict:
    models = {}
    if models_dir is None:
        return models
    for pot in range(3):
        for name in (f"model_pot{pot + 1}.npz", f"model_pot{pot + 1}.bin"):
            path = models_dir / name
            if path.exists():
                models[pot] = load_model(path)
                break
        else:
            logger.warning("no checkpoint for pot_%d in %s; AI mode will fall back "
                           "to threshold logic for it", pot + 1, models_dir)
    return models


def cmd_serve(args) -> int:
    import uvicorn

    from .gateway import GatewayRuntime, build_app

    cfg = _load(args)
    port = args.port if args.port is not None else cfg.gateway.port
    time_scale = args.time_scale if args.time_scale is not None else cfg.gateway.time_scale
    models = load_models_dir(args.models)
    if not models:
        logger.warning("serving without forecast models; AI mode falls back to thresholds")

    loop = ClosedLoop(cfg.sim, ctrl_cfg=cfg.controller, models=models,
                      send_interval=cfg.firmware.send_interval)
    runtime = GatewayRuntime(loop, event_buffer=cfg.gateway.event_buffer, time_scale=time_scale)
    ui_dir = args.ui if args.ui is not None else Path("frontend")
    if not (ui_dir / "index.html").exists():
        ui_dir = None
    app = build_app(runtime, token=cfg.gateway.token, ui_dir=ui_dir)
    if ui_dir is not None:
        logger.info("hosting dashboard from %s at /ui", ui_dir)

    runtime.start()
    try:
        uvicorn.run(app, host=cfg.gateway.host, port=port, log_level="warning")
    except (OSError, SystemExit) as e:
        print(f"error: cannot serve on {cfg.gateway.host}:{port}: {e}", file=sys.stderr)
        return 1
    finally:
        runtime.stop()
    return 0


def cmd_replay(args) -> int:
    log = TelemetryLog.read(args.log)
    if len(log) == 0:
        print("log is empty")
        return 0
    prev_ts = None
    for snap in log:
        if args.speed > 0 and prev_ts is not None:
            time.sleep(max(0.0, (snap.timestamp - prev_ts) / args.speed))
        print(encode_telemetry(snap))
        prev_ts = snap.timestamp
    first, last = log[0].timestamp, log[-1].timestamp
    print(f"# replayed {len(log)} frames spanning {last - first} s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
