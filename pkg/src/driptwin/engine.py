"""Closed-loop assembly: weather and pots feed the emulated device, telemetry
flows back through the store and controller, commands return over the bus.

One tick advances sim time by dt: sensors are sampled, the firmware runs one
loop (commands, relays, maybe a frame), the backend processes any frame, and
the pots then integrate the coming dt with the freshly applied valve states.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .controller import Controller, ControllerConfig
from .core import NUM_POTS, NUM_SOIL_CHANNELS, RelayState, SensorSnapshot
from .firmware import FirmwareEmulator, SensorInputs, SerialBus
from .forecast.model import ForecastModel
from .forecast.windows import window_count
from .protocol import parse_telemetry
from .sim import (
    PotState,
    SimConfig,
    WeatherState,
    initial_weather,
    read_dht,
    read_flow,
    read_soil_adc,
    step_pot_ex,
    step_weather,
)
from .store import TelemetryLog, to_dataset

logger = logging.getLogger(__name__)


@dataclass
class RunSummary:
    ticks: int = 0
    frames: int = 0
    rain_ticks: int = 0
    clamp_events: int = 0
    relay_on_ticks: list[int] = field(default_factory=lambda: [0] * NUM_POTS)
    water_l: list[float] = field(default_factory=lambda: [0.0] * NUM_POTS)
    moisture_min: list[float] = field(default_factory=lambda: [math.inf] * NUM_POTS)
    moisture_max: list[float] = field(default_factory=lambda: [-math.inf] * NUM_POTS)

    def to_dict(self) -> dict:
        duty = [ticks / self.ticks if self.ticks else 0.0 for ticks in self.relay_on_ticks]
        return {
            "ticks": self.ticks,
            "frames": self.frames,
            "rain_ticks": self.rain_ticks,
            "clamp_events": self.clamp_events,
            "relay_duty": duty,
            "water_l": list(self.water_l),
            "water_l_total": sum(self.water_l),
            "moisture_min": list(self.moisture_min),
            "moisture_max": list(self.moisture_max),
        }


class ClosedLoop:
    """Deterministic simulation of the whole rig for a given config and seed."""

    def __init__(self, sim_cfg: SimConfig,
                 ctrl_cfg: Optional[ControllerConfig] = None,
                 log: Optional[TelemetryLog] = None,
                 models: Optional[dict[int, ForecastModel]] = None,
                 send_interval: float = 2.0):
        sim_cfg.validate()
        if max(sim_cfg.dt, send_interval) < 1.0:
            raise ValueError("frame spacing below 1 s would collide integer timestamps; "
                             "raise dt or send_interval")
        self.cfg = sim_cfg
        self.log = log if log is not None else TelemetryLog()
        self.models = models or {}

        seeds = np.random.SeedSequence(sim_cfg.seed).spawn(2)
        self._weather_rng = np.random.default_rng(seeds[0])
        self._soil_rng = np.random.default_rng(seeds[1])

        self.bus = SerialBus()
        ctrl_cfg = ctrl_cfg or ControllerConfig()
        self.firmware = FirmwareEmulator(self.bus, send_interval=send_interval,
                                         thresholds=ctrl_cfg.thresholds)
        self.controller = Controller(ctrl_cfg, send_line=self.bus.backend_send,
                                     forecast_provider=self.forecasts_from_log)

        self.now = 0.0
        self._tick_index = 0
        self.weather: WeatherState = initial_weather(sim_cfg)
        self.pots = [PotState(moisture=m, m_sat=sim_cfg.m_sat) for m in sim_cfg.m0]
        self.summary = RunSummary()

        # fault injection (scripted scenarios)
        self.stuck_soil: dict[int, int] = {}
        self.dht_failed = False

        self.on_frame: Optional[Callable[[SensorSnapshot], None]] = None

    # -- fault injection hooks ----------------------------------------------

    def stick_soil_channel(self, channel: int, value: int) -> None:
        if channel not in range(NUM_SOIL_CHANNELS):
            raise ValueError(f"soil channel must be 0..5, got {channel}")
        self.stuck_soil[channel] = value

    def release_soil_channel(self, channel: int) -> None:
        self.stuck_soil.pop(channel, None)

    def set_dht_failed(self, failed: bool) -> None:
        self.dht_failed = failed

    # -- forecasting --------------------------------------------------------

    def forecasts_from_log(self) -> dict[int, Optional[np.ndarray]]:
        """Latest per-pot forecast in raw counts, or None without model/history."""
        out: dict[int, Optional[np.ndarray]] = {}
        for pot in range(NUM_POTS):
            model = self.models.get(pot)
            if model is None or len(self.log) < model.spec.lookback:
                out[pot] = None
                continue
            ds = to_dataset(self.log.snapshots[-model.spec.lookback:], pot)
            window = model.scaler.transform(ds.features)
            out[pot] = model.predict_counts(window)
        return out

    # -- main loop ------------------------------------------------------------

    def tick(self) -> Optional[SensorSnapshot]:
        cfg = self.cfg
        self._tick_index += 1
        self.now = self._tick_index * cfg.dt

        self.weather = step_weather(self.weather, self.now, cfg, self._weather_rng)

        soil = []
        for ch in range(NUM_SOIL_CHANNELS):
            if ch in self.stuck_soil:
                # sensor fault: the channel repeats the stuck value; the healthy
                # channel's noise draw is still consumed to keep runs comparable
                read_soil_adc(self.pots[ch // 2], ch, cfg, self._soil_rng)
                soil.append(self.stuck_soil[ch])
            else:
                soil.append(read_soil_adc(self.pots[ch // 2], ch, cfg, self._soil_rng))
        if self.dht_failed:
            temp_c: Optional[int] = None
            hum_pct: Optional[int] = None
        else:
            temp_c, hum_pct = read_dht(self.weather)

        inputs = SensorInputs(soil_adc=tuple(soil), temperature_c=temp_c,
                              humidity_pct=hum_pct, rain_wet=self.weather.raining)
        snap = self.firmware.loop_iteration(
            self.now, inputs, lambda relays: read_flow(relays, cfg)[0])

        if snap is not None:
            self.log.append(snap)
            self.controller.on_telemetry(snap)
            self.summary.frames += 1
            if self.on_frame is not None:
                self.on_frame(snap)

        relays = self.firmware.state.relay
        for pot in range(NUM_POTS):
            valve_open = relays[pot] is RelayState.ON
            self.pots[pot], clamped = step_pot_ex(self.pots[pot], self.weather, valve_open, cfg)
            if clamped:
                self.summary.clamp_events += 1
            if valve_open:
                self.summary.relay_on_ticks[pot] += 1
                self.summary.water_l[pot] += cfg.lpm_per_valve * cfg.dt / 60.0
            self.summary.moisture_min[pot] = min(self.summary.moisture_min[pot],
                                                 self.pots[pot].moisture)
            self.summary.moisture_max[pot] = max(self.summary.moisture_max[pot],
                                                 self.pots[pot].moisture)

        self.summary.ticks += 1
        if self.weather.raining:
            self.summary.rain_ticks += 1
        return snap

    def run(self, duration: float) -> RunSummary:
        """Advance the loop by `duration` sim seconds (whole ticks)."""
        target_ticks = self._tick_index + int(round(duration / self.cfg.dt))
        while self._tick_index < target_ticks:
            self.tick()
        return self.summary

    def run_until(self, t: float) -> RunSummary:
        while self.now + self.cfg.dt <= t + 1e-9:
            self.tick()
        return self.summary
