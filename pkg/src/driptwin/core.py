"""Shared vocabulary for the irrigation twin: modes, relay logic, pots, snapshots."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Optional, Sequence

ADC_MAX = 4095          # 12-bit converter full scale
NUM_POTS = 3
NUM_SOIL_CHANNELS = 6   # two probes per pot

# DHT sensor usable bands after quantization
TEMP_MIN_C, TEMP_MAX_C = 0, 50
HUM_MIN_PCT, HUM_MAX_PCT = 20, 90


class Mode(IntEnum):
    """Operating mode; the integer codes are part of the wire protocol."""

    AI = 1
    AUTO = 2
    MANUAL = 3


def parse_mode(code: int) -> Mode:
    """Map a wire code to a Mode; raises ValueError so callers keep the previous mode."""
    try:
        return Mode(code)
    except ValueError:
        raise ValueError(f"unknown mode code {code!r} (valid codes: 1, 2, 3)") from None


class RelayState(IntEnum):
    """Logical relay state. The wire value is the int (0=OFF, 1=ON)."""

    OFF = 0
    ON = 1

    @property
    def electrical(self) -> str:
        # Active-low driver: an energized (ON) relay pulls the pin LOW.
        return "LOW" if self is RelayState.ON else "HIGH"

    @classmethod
    def from_electrical(cls, level: str) -> "RelayState":
        if level == "LOW":
            return cls.ON
        if level == "HIGH":
            return cls.OFF
        raise ValueError(f"unknown electrical level {level!r}")


@dataclass(frozen=True)
class PotId:
    """One of the three pots, tied to a relay channel and a pair of soil probes."""

    index: int

    def __post_init__(self) -> None:
        if self.index not in (0, 1, 2):
            raise ValueError(f"pot index must be 0, 1 or 2, got {self.index!r}")

    @property
    def label(self) -> str:
        return f"pot_{self.index + 1}"

    @property
    def relay_channel(self) -> int:
        return self.index

    @property
    def soil_channels(self) -> tuple[int, int]:
        return (2 * self.index, 2 * self.index + 1)


POTS = tuple(PotId(i) for i in range(NUM_POTS))


def soil_channels_for_pot(pot: int) -> tuple[int, int]:
    """Soil ADC channel pair (2i, 2i+1) wired to pot index i."""
    return PotId(pot).soil_channels


@dataclass(frozen=True)
class SensorSnapshot:
    """One timestamped reading of every sensor plus the relay and mode state.

    ``temperature_c``/``humidity_pct`` are None when the climate sensor read
    failed; they fail as a pair. ``soil_adc`` holds six raw counts (higher =
    drier soil). ``rain_wet`` is the binary rain-plate state.
    """

    timestamp: int
    temperature_c: Optional[int]
    humidity_pct: Optional[int]
    rain_wet: bool
    flow_lpm: float
    soil_adc: tuple[int, ...]
    relay: tuple[RelayState, ...]
    mode: Mode

    def __post_init__(self) -> None:
        object.__setattr__(self, "soil_adc", tuple(self.soil_adc))
        object.__setattr__(self, "relay", tuple(RelayState(r) for r in self.relay))

    @property
    def dht_readable(self) -> bool:
        return self.temperature_c is not None

    def zone_average(self, pot: int) -> float:
        a, b = soil_channels_for_pot(pot)
        return (self.soil_adc[a] + self.soil_adc[b]) / 2.0

    def validate(self) -> None:
        """Raise ValueError if any field is outside its documented domain."""
        if not isinstance(self.timestamp, int) or isinstance(self.timestamp, bool):
            raise ValueError("timestamp must be an integer second count")
        if self.timestamp < 0:
            raise ValueError("timestamp must be >= 0")
        if (self.temperature_c is None) != (self.humidity_pct is None):
            raise ValueError("temperature and humidity fail as a pair")
        if self.temperature_c is not None:
            _check_int("temperature_c", self.temperature_c, TEMP_MIN_C, TEMP_MAX_C)
        if self.humidity_pct is not None:
            _check_int("humidity_pct", self.humidity_pct, HUM_MIN_PCT, HUM_MAX_PCT)
        if not isinstance(self.flow_lpm, (int, float)) or isinstance(self.flow_lpm, bool):
            raise ValueError("flow_lpm must be numeric")
        if not (self.flow_lpm == self.flow_lpm) or self.flow_lpm in (float("inf"), float("-inf")):
            raise ValueError("flow_lpm must be finite")
        if self.flow_lpm < 0:
            raise ValueError("flow_lpm must be >= 0")
        if len(self.soil_adc) != NUM_SOIL_CHANNELS:
            raise ValueError(f"soil_adc must have {NUM_SOIL_CHANNELS} channels")
        for ch, counts in enumerate(self.soil_adc):
            _check_int(f"soil_adc[{ch}]", counts, 0, ADC_MAX)
        if len(self.relay) != NUM_POTS:
            raise ValueError(f"relay must have {NUM_POTS} channels")


def _check_int(name: str, value: object, lo: int, hi: int) -> None:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ValueError(f"{name} must be an integer")
    if not (lo <= value <= hi):
        raise ValueError(f"{name} out of range [{lo}, {hi}]: {value}")


class NotificationKind(Enum):
    RELAY_ACTIVATED = "relay_activated"
    RELAY_DEACTIVATED = "relay_deactivated"
    SENSOR_FAILURE = "sensor_failure"
    MODE_CHANGED = "mode_changed"
    CONNECTIVITY_LOST = "connectivity_lost"
    CONNECTIVITY_RESTORED = "connectivity_restored"
    DIAGNOSTIC = "diagnostic"


@dataclass(frozen=True)
class Notification:
    """Operator-facing event; relay_activated fires exactly once per OFF->ON edge."""

    timestamp: int
    kind: NotificationKind
    message: str
    pot_id: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "ts": self.timestamp,
            "kind": self.kind.value,
            "pot": self.pot_id,
            "message": self.message,
        }


def count_on(relays: Sequence[RelayState]) -> int:
    return sum(1 for r in relays if r is RelayState.ON)
