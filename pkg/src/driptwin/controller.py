"""Backend orchestration: mode dispatch, AI irrigation planning, failure and
connectivity handling.

The controller consumes parsed telemetry frames (one frame = one control
cycle) and talks back to the device exclusively through wire-protocol command
lines. Autonomous threshold logic stays on the device; this side plans AI
irrigation, mirrors AUTO decisions to spot divergence, relays manual requests,
and pulls every valve low-side OFF the moment a sensor goes bad.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    ADC_MAX,
    NUM_POTS,
    NUM_SOIL_CHANNELS,
    Mode,
    Notification,
    NotificationKind,
    RelayState,
    SensorSnapshot,
    parse_mode,
)
from .firmware import zone_average
from .protocol import ModeCommand, RelayCommand, ThresholdCommand, format_command

logger = logging.getLogger(__name__)

# AUTO threshold that can never be exceeded by a probe-pair average (strict >),
# used to keep the on-device logic quiet while a failsafe is engaged.
FAILSAFE_THRESHOLD = ADC_MAX

DHT_SENSOR = "dht"


class RejectedCommand(Exception):
    """User input refused by a mode or safety guard; the reason is the message."""


@dataclass
class ControllerConfig:
    thresholds: tuple[int, int, int] = (2500, 2500, 2500)
    alpha_s_per_count: float = 0.1     # seconds of irrigation per count of forecast deficit
    dur_min_s: float = 5.0
    dur_max_s: float = 120.0
    stuck_window: int = 5              # consecutive frames before a sensor is declared failed
    divergence_cycles: int = 2         # mirror mismatch streak before a diagnostic


@dataclass(frozen=True)
class PotPlan:
    irrigate: bool
    duration_s: float

    def __post_init__(self) -> None:
        if not self.irrigate and self.duration_s != 0:
            raise ValueError("a pot that is not irrigated must have duration 0")


@dataclass(frozen=True)
class IrrigationPlan:
    pots: tuple[PotPlan, PotPlan, PotPlan]

    def to_dict(self) -> dict:
        return {f"pot_{i + 1}": {"irrigate": p.irrigate, "duration_s": p.duration_s}
                for i, p in enumerate(self.pots)}


def plan_duration(mean_forecast: float, threshold: int, cfg: ControllerConfig) -> float:
    """Deficit-proportional watering time, ceil'd to whole seconds then clamped.

    The product is rounded to 9 decimals before ceil so float dust
    (0.1 * 300 -> 30.000000000000004) cannot inflate the duration.
    """
    deficit = mean_forecast - threshold
    if deficit <= 0:
        return 0.0
    raw = math.ceil(round(cfg.alpha_s_per_count * deficit, 9))
    return float(min(max(raw, cfg.dur_min_s), cfg.dur_max_s))


def stuck_at_rail(readings: Sequence[int], window: int) -> bool:
    """True when the last `window` readings all sit on the same ADC rail (0 or max)."""
    if len(readings) < window:
        return False
    tail = list(readings)[-window:]
    return all(v == 0 for v in tail) or all(v == ADC_MAX for v in tail)


SOIL_SENSORS = tuple(f"soil{ch}" for ch in range(NUM_SOIL_CHANNELS))
ALL_SENSORS = SOIL_SENSORS + (DHT_SENSOR,)


def classify_health(recent: Sequence[SensorSnapshot], window: int) -> dict[str, bool]:
    """Per-sensor health over the recent frames: True = healthy.

    A soil channel fails after `window` consecutive rail readings; the climate
    sensor fails after `window` consecutive unreadable frames. A single glitch
    below the window never trips a failure.
    """
    health = {name: True for name in ALL_SENSORS}
    for ch in range(NUM_SOIL_CHANNELS):
        health[f"soil{ch}"] = not stuck_at_rail([s.soil_adc[ch] for s in recent], window)
    if len(recent) >= window:
        tail = list(recent)[-window:]
        health[DHT_SENSOR] = not all(not s.dht_readable for s in tail)
    return health


class Controller:
    """Owns mode state and reacts to telemetry; one frame is one control cycle."""

    def __init__(self, cfg: Optional[ControllerConfig] = None,
                 send_line: Optional[Callable[[str], None]] = None,
                 forecast_provider: Optional[Callable[[], dict[int, Optional[np.ndarray]]]] = None):
        self.cfg = cfg or ControllerConfig()
        self._send_line = send_line or (lambda line: None)
        self.forecast_provider = forecast_provider

        self.current_mode: Mode = Mode.AUTO
        self.last_mode: Mode = Mode.AUTO
        self.connected: bool = True
        self.thresholds: list[int] = list(self.cfg.thresholds)
        self.sensor_health: dict[str, bool] = {name: True for name in ALL_SENSORS}
        self.failsafe_active: bool = False
        self.plan: Optional[IrrigationPlan] = None
        self.latest_forecasts: dict[int, Optional[np.ndarray]] = {}
        self.ai_fallback_pots: set[int] = set()

        self.now: float = 0.0
        self.cycle: int = 0
        self.notifications: list[Notification] = []
        self._observers: list[Callable[[Notification], None]] = []

        self._recent: deque[SensorSnapshot] = deque(maxlen=max(self.cfg.stuck_window, 2))
        self._prev_relay: Optional[tuple[RelayState, ...]] = None
        self._plan_end: dict[int, float] = {}
        self._mismatch_streak: list[int] = [0] * NUM_POTS
        self._divergence_flagged: list[bool] = [False] * NUM_POTS

    # -- wiring ------------------------------------------------------------

    def subscribe(self, callback: Callable[[Notification], None]) -> None:
        self._observers.append(callback)

    def _notify(self, kind: NotificationKind, message: str, pot: Optional[int] = None) -> None:
        note = Notification(timestamp=int(self.now), kind=kind, message=message, pot_id=pot)
        self.notifications.append(note)
        for cb in self._observers:
            cb(note)

    def _send(self, cmd) -> None:
        self._send_line(format_command(cmd))

    # -- user inputs (gateway-facing) ---------------------------------------

    def set_mode(self, code: int) -> Mode:
        """Apply a user mode selection; invalid codes raise and leave mode unchanged."""
        mode = parse_mode(code)
        if not self.connected:
            raise RejectedCommand("controller is offline; mode changes require connectivity")
        self.current_mode = mode
        self.dispatch()
        return mode

    def request_manual_relay(self, pot: int, on: bool) -> None:
        """Forward one user valve request; honored only in MANUAL mode."""
        if pot not in range(NUM_POTS):
            raise ValueError(f"pot index must be 0..2, got {pot}")
        if self.current_mode is not Mode.MANUAL:
            raise RejectedCommand("manual control requires MANUAL mode")
        if not self.connected:
            raise RejectedCommand("controller is offline; manual control requires connectivity")
        if on and self.failsafe_active:
            raise RejectedCommand("sensor failure active: irrigation is halted")
        self._send(RelayCommand(pot, RelayState.ON if on else RelayState.OFF))

    def set_threshold(self, pot: int, counts: int) -> None:
        if pot not in range(NUM_POTS):
            raise ValueError(f"pot index must be 0..2, got {pot}")
        if not (0 <= counts <= ADC_MAX):
            raise ValueError(f"threshold counts out of range (0-{ADC_MAX}): {counts}")
        self.thresholds[pot] = counts
        self._mismatch_streak[pot] = 0
        if not self.failsafe_active:
            self._send(ThresholdCommand(pot, counts))

    def set_connectivity(self, connected: bool) -> None:
        """Model the operator/cloud link going down or up; the serial link stays."""
        if connected == self.connected:
            return
        self.connected = connected
        if not connected:
            self._notify(NotificationKind.CONNECTIVITY_LOST,
                         f"connectivity lost in {self.current_mode.name} mode")
            if self.current_mode is Mode.MANUAL:
                # Without an operator there is no manual input: stop watering.
                for pot in range(NUM_POTS):
                    self._send(RelayCommand(pot, RelayState.OFF))
        else:
            self._notify(NotificationKind.CONNECTIVITY_RESTORED,
                         "connectivity restored; device state resynced")
            self._resync_device()

    def _resync_device(self) -> None:
        self._send(ModeCommand(int(self.current_mode)))
        for pot in range(NUM_POTS):
            counts = FAILSAFE_THRESHOLD if self.failsafe_active else self.thresholds[pot]
            self._send(ThresholdCommand(pot, counts))

    # -- mode dispatch -------------------------------------------------------

    def dispatch(self) -> None:
        """Run the entry routine for the current mode exactly once per transition."""
        if self.current_mode is self.last_mode:
            return
        self._notify(NotificationKind.MODE_CHANGED,
                     f"mode changed: {self.last_mode.name} -> {self.current_mode.name}")
        if self.current_mode is Mode.AI:
            self.run_ai_mode()
        elif self.current_mode is Mode.AUTO:
            self.run_auto_mode()
        else:
            self.run_manual_mode()
        self.last_mode = self.current_mode

    def run_ai_mode(self) -> None:
        """Plan per-pot watering from the forecasts and start the valve timers."""
        self._send(ModeCommand(int(Mode.AI)))
        self._plan_end.clear()
        self.ai_fallback_pots.clear()
        forecasts: dict[int, Optional[np.ndarray]] = {}
        if self.forecast_provider is not None:
            forecasts = self.forecast_provider()
        self.latest_forecasts = forecasts

        pot_plans = []
        for pot in range(NUM_POTS):
            forecast = forecasts.get(pot)
            if forecast is None:
                self.ai_fallback_pots.add(pot)
                self._notify(NotificationKind.DIAGNOSTIC,
                             f"pot_{pot + 1}: no forecast available; falling back to threshold logic",
                             pot=pot)
                pot_plans.append(PotPlan(irrigate=False, duration_s=0.0))
                continue
            duration = plan_duration(float(np.mean(forecast)), self.thresholds[pot], self.cfg)
            if duration > 0 and not self.failsafe_active:
                pot_plans.append(PotPlan(irrigate=True, duration_s=duration))
                self._send(RelayCommand(pot, RelayState.ON))
                self._plan_end[pot] = self.now + duration
            else:
                pot_plans.append(PotPlan(irrigate=False, duration_s=0.0))
        self.plan = IrrigationPlan(pots=tuple(pot_plans))

    def run_auto_mode(self) -> None:
        """Hand autonomous thresholding to the device; keep only the mirror here."""
        self._send(ModeCommand(int(Mode.AUTO)))
        self._plan_end.clear()
        self.ai_fallback_pots.clear()
        self.plan = None
        self._mismatch_streak = [0] * NUM_POTS
        self._divergence_flagged = [False] * NUM_POTS

    def run_manual_mode(self) -> None:
        """Pass control to the operator; stale requests are cleared first."""
        self._send(ModeCommand(int(Mode.MANUAL)))
        self._plan_end.clear()
        self.ai_fallback_pots.clear()
        self.plan = None
        for pot in range(NUM_POTS):
            self._send(RelayCommand(pot, RelayState.OFF))

    # -- telemetry cycle ------------------------------------------------------

    def on_telemetry(self, snap: SensorSnapshot) -> None:
        """One control cycle: health, notifications, plan timers, mirrors."""
        self.now = float(snap.timestamp)
        self.cycle += 1
        self._recent.append(snap)

        self._emit_relay_edges(snap)
        self._update_health(snap)
        self._run_plan_timers(snap)
        if self.current_mode is Mode.AI and self.ai_fallback_pots and not self.failsafe_active:
            self._run_ai_fallback(snap)
        if self.current_mode is Mode.AUTO and not self.failsafe_active:
            self._check_divergence(snap)
        if self.failsafe_active:
            self._reassert_failsafe(snap)

    def _emit_relay_edges(self, snap: SensorSnapshot) -> None:
        if self._prev_relay is not None:
            for pot, (before, after) in enumerate(zip(self._prev_relay, snap.relay)):
                if before is RelayState.OFF and after is RelayState.ON:
                    self._notify(NotificationKind.RELAY_ACTIVATED,
                                 f"relay {pot} activated (valve open, pot_{pot + 1})", pot=pot)
                elif before is RelayState.ON and after is RelayState.OFF:
                    self._notify(NotificationKind.RELAY_DEACTIVATED,
                                 f"relay {pot} deactivated (valve closed, pot_{pot + 1})", pot=pot)
        self._prev_relay = snap.relay

    def _update_health(self, snap: SensorSnapshot) -> None:
        health = classify_health(self._recent, self.cfg.stuck_window)
        newly_failed = [name for name in ALL_SENSORS
                        if self.sensor_health[name] and not health[name]]
        recovered_all = self.failsafe_active and all(health.values())
        self.sensor_health = health

        if newly_failed:
            for name in newly_failed:
                self._notify(NotificationKind.SENSOR_FAILURE,
                             f"sensor {name} failed (stuck/unreadable); irrigation halted")
            self._engage_failsafe()
        elif recovered_all:
            self._release_failsafe()

    def _engage_failsafe(self) -> None:
        if self.failsafe_active:
            return
        self.failsafe_active = True
        self._plan_end.clear()
        self.plan = None
        for pot in range(NUM_POTS):
            self._send(RelayCommand(pot, RelayState.OFF))
            # Raise the on-device threshold to the unreachable rail so AUTO
            # logic cannot re-energize a valve from a stuck-high reading.
            self._send(ThresholdCommand(pot, FAILSAFE_THRESHOLD))

    def _release_failsafe(self) -> None:
        self.failsafe_active = False
        for pot in range(NUM_POTS):
            self._send(ThresholdCommand(pot, self.thresholds[pot]))
        self._notify(NotificationKind.DIAGNOSTIC, "all sensors healthy again; failsafe released")

    def _reassert_failsafe(self, snap: SensorSnapshot) -> None:
        for pot in range(NUM_POTS):
            if snap.relay[pot] is RelayState.ON:
                self._send(RelayCommand(pot, RelayState.OFF))

    def _run_plan_timers(self, snap: SensorSnapshot) -> None:
        for pot, end in list(self._plan_end.items()):
            if snap.timestamp >= end:
                self._send(RelayCommand(pot, RelayState.OFF))
                del self._plan_end[pot]

    def _run_ai_fallback(self, snap: SensorSnapshot) -> None:
        # Pots without a model follow plain threshold logic, driven from here.
        for pot in sorted(self.ai_fallback_pots):
            avg = zone_average(snap.soil_adc[2 * pot], snap.soil_adc[2 * pot + 1])
            desired = RelayState.ON if avg > self.thresholds[pot] else RelayState.OFF
            if snap.relay[pot] is not desired:
                self._send(RelayCommand(pot, desired))

    def _check_divergence(self, snap: SensorSnapshot) -> None:
        for pot in range(NUM_POTS):
            avg = zone_average(snap.soil_adc[2 * pot], snap.soil_adc[2 * pot + 1])
            expected = RelayState.ON if avg > self.thresholds[pot] else RelayState.OFF
            if snap.relay[pot] is expected:
                self._mismatch_streak[pot] = 0
                self._divergence_flagged[pot] = False
                continue
            self._mismatch_streak[pot] += 1
            if (self._mismatch_streak[pot] >= self.cfg.divergence_cycles
                    and not self._divergence_flagged[pot]):
                self._divergence_flagged[pot] = True
                self._notify(NotificationKind.DIAGNOSTIC,
                             f"relay {pot} diverges from the threshold mirror "
                             f"(avg {avg} vs threshold {self.thresholds[pot]})", pot=pot)
