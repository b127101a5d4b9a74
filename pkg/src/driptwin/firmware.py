"""Emulated device firmware: boot defaults, serial command handling, threshold
relay logic, and the telemetry send timer.

The emulator mirrors the on-device loop: drain serial commands, refresh the
relays, then emit one telemetry frame when the send timer has elapsed. All
behavior is driven by the simulation clock passed into loop_iteration.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .core import Mode, RelayState, SensorSnapshot
from .protocol import (
    ModeCommand,
    ProtocolError,
    RelayCommand,
    ThresholdCommand,
    encode_telemetry,
    parse_command,
)

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 2500
DEFAULT_SEND_INTERVAL_S = 2.0


class SerialBus:
    """In-memory duplex line channel; each queued entry is one newline-free line."""

    def __init__(self) -> None:
        self._to_device: deque[str] = deque()
        self._to_backend: deque[str] = deque()

    @staticmethod
    def _normalize(line: str) -> str:
        if line.endswith("\n"):
            line = line[:-1]
        if "\n" in line or "\r" in line:
            raise ValueError("bus lines must not contain interior newlines")
        return line

    def backend_send(self, line: str) -> None:
        self._to_device.append(self._normalize(line))

    def device_receive(self) -> list[str]:
        lines = list(self._to_device)
        self._to_device.clear()
        return lines

    def device_send(self, line: str) -> None:
        self._to_backend.append(self._normalize(line))

    def backend_receive(self) -> list[str]:
        lines = list(self._to_backend)
        self._to_backend.clear()
        return lines


@dataclass
class FirmwareState:
    mode: Mode = Mode.AUTO
    threshold: list[int] = field(default_factory=lambda: [DEFAULT_THRESHOLD] * 3)
    relay: list[RelayState] = field(default_factory=lambda: [RelayState.OFF] * 3)
    manual_relay_request: list[RelayState] = field(default_factory=lambda: [RelayState.OFF] * 3)
    last_send: float = 0.0
    send_interval: float = DEFAULT_SEND_INTERVAL_S
    malformed_commands: int = 0


@dataclass(frozen=True)
class SensorInputs:
    """Raw values the firmware reads each loop; DHT pair is None when unreadable."""

    soil_adc: tuple[int, ...]
    temperature_c: Optional[int]
    humidity_pct: Optional[int]
    rain_wet: bool


def setup(send_interval: float = DEFAULT_SEND_INTERVAL_S,
          thresholds: Optional[Sequence[int]] = None) -> FirmwareState:
    """Boot state: relays OFF (electrical HIGH), AUTO mode, timer at zero."""
    state = FirmwareState(send_interval=send_interval)
    if thresholds is not None:
        if len(thresholds) != 3:
            raise ValueError("thresholds must have 3 entries")
        state.threshold = [int(t) for t in thresholds]
    return state


def zone_average(a: int, b: int) -> int:
    """Two-probe average with floor division, the AUTO decision variable."""
    return (a + b) // 2


def auto_decision(avg: int, threshold: int) -> RelayState:
    """ON strictly above threshold (high counts = dry soil); ties stay OFF."""
    return RelayState.ON if avg > threshold else RelayState.OFF


def update_relays(state: FirmwareState, soil_adc: Sequence[int]) -> None:
    """Refresh relay outputs for the current mode.

    AUTO compares each pot's probe-pair average against its threshold; MANUAL
    copies the latest requests; AI leaves the relays to backend commands.
    """
    if state.mode is Mode.AUTO:
        for i in range(3):
            avg = zone_average(soil_adc[2 * i], soil_adc[2 * i + 1])
            state.relay[i] = auto_decision(avg, state.threshold[i])
    elif state.mode is Mode.MANUAL:
        state.relay = list(state.manual_relay_request)


def handle_serial_commands(state: FirmwareState, lines: Sequence[str]) -> None:
    """Apply each command line in order; malformed lines are counted and skipped."""
    for line in lines:
        try:
            cmd = parse_command(line)
        except ProtocolError as e:
            state.malformed_commands += 1
            logger.warning("malformed command %r (col %d): %s", line, e.column, e)
            continue
        if isinstance(cmd, ModeCommand):
            state.mode = Mode(cmd.code)
        elif isinstance(cmd, ThresholdCommand):
            state.threshold[cmd.relay] = cmd.counts
        elif isinstance(cmd, RelayCommand):
            # Remembered as the manual request and applied immediately; AUTO's
            # own logic recomputes (and overrides) on the same loop.
            state.manual_relay_request[cmd.relay] = cmd.state
            state.relay[cmd.relay] = cmd.state


def send_sensor_data(state: FirmwareState, snap: SensorSnapshot, bus: SerialBus) -> str:
    """Emit one newline-terminated telemetry frame onto the bus."""
    line = encode_telemetry(snap) + "\n"
    bus.device_send(line)
    return line


class FirmwareEmulator:
    """The device side of the serial link, driven once per simulation tick."""

    def __init__(self, bus: SerialBus, send_interval: float = DEFAULT_SEND_INTERVAL_S,
                 thresholds: Optional[Sequence[int]] = None):
        self.bus = bus
        self.state = setup(send_interval=send_interval, thresholds=thresholds)

    def loop_iteration(self, now: float, inputs: SensorInputs,
                       flow_fn: Callable[[Sequence[RelayState]], float]) -> Optional[SensorSnapshot]:
        """One pass of the device loop; returns the snapshot if a frame was sent.

        The send timer is strict (frames only after `now - last_send > interval`)
        and catches up in whole intervals so the steady-state frame period equals
        send_interval rather than interval + dt.
        """
        state = self.state
        handle_serial_commands(state, self.bus.device_receive())
        update_relays(state, inputs.soil_adc)

        elapsed = now - state.last_send
        if elapsed <= state.send_interval:
            return None
        state.last_send += state.send_interval * math.floor(elapsed / state.send_interval)
        snap = SensorSnapshot(
            timestamp=int(math.floor(now + 1e-9)),
            temperature_c=inputs.temperature_c,
            humidity_pct=inputs.humidity_pct,
            rain_wet=inputs.rain_wet,
            flow_lpm=flow_fn(state.relay),
            soil_adc=tuple(inputs.soil_adc),
            relay=tuple(state.relay),
            mode=state.mode,
        )
        send_sensor_data(state, snap, self.bus)
        return snap
