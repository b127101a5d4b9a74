"""Line protocol between backend and device: command grammar down, telemetry frames up.

Commands are single text lines with uppercase keywords and single spaces:

    MODE <1|2|3>
    THRESHOLD <0-2> <0-4095>
    RELAY <0-2> <ON|OFF>

Telemetry frames are one JSON object per line with a fixed key order
(ts, temp, hum, rain, flow, soil, relay, mode) and integer-only payloads,
except `flow` (number) and `temp`/`hum` which are null while the climate
sensor is unreadable. The full byte-exact schema lives in docs/protocol.md.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Union

from .core import ADC_MAX, Mode, RelayState, SensorSnapshot

FRAME_KEYS = ("ts", "temp", "hum", "rain", "flow", "soil", "relay", "mode")


class ProtocolError(ValueError):
    """Rejected line; `column` is the 1-based position of the offending token."""

    def __init__(self, message: str, column: int = 1):
        super().__init__(message)
        self.column = column


@dataclass(frozen=True)
class ModeCommand:
    code: int


@dataclass(frozen=True)
class ThresholdCommand:
    relay: int
    counts: int


@dataclass(frozen=True)
class RelayCommand:
    relay: int
    state: RelayState


Command = Union[ModeCommand, ThresholdCommand, RelayCommand]


def parse_command(line: str) -> Command:
    """Parse one command line; malformed input raises ProtocolError with a column."""
    if "\n" in line or "\r" in line:
        raise ProtocolError("command must be a single line", line.find("\n") + 1 or line.find("\r") + 1)
    if line == "":
        raise ProtocolError("empty command line")

    tokens = line.split(" ")
    columns = []
    col = 1
    for tok in tokens:
        columns.append(col)
        col += len(tok) + 1
    for tok, at in zip(tokens, columns):
        if tok == "":
            raise ProtocolError("expected a single space between tokens", at)

    keyword = tokens[0]
    if keyword == "MODE":
        _expect_arity(tokens, 2, columns)
        code = _parse_int(tokens[1], columns[1], "mode code")
        if code not in (1, 2, 3):
            raise ProtocolError(f"mode code out of range (1-3): {code}", columns[1])
        return ModeCommand(code)
    if keyword == "THRESHOLD":
        _expect_arity(tokens, 3, columns)
        relay = _parse_relay_index(tokens[1], columns[1])
        counts = _parse_int(tokens[2], columns[2], "threshold counts")
        if not (0 <= counts <= ADC_MAX):
            raise ProtocolError(f"threshold counts out of range (0-{ADC_MAX}): {counts}", columns[2])
        return ThresholdCommand(relay, counts)
    if keyword == "RELAY":
        _expect_arity(tokens, 3, columns)
        relay = _parse_relay_index(tokens[1], columns[1])
        if tokens[2] == "ON":
            return RelayCommand(relay, RelayState.ON)
        if tokens[2] == "OFF":
            return RelayCommand(relay, RelayState.OFF)
        raise ProtocolError(f"expected ON or OFF, got {tokens[2]!r}", columns[2])
    raise ProtocolError(f"unknown keyword {keyword!r}", columns[0])


def format_command(cmd: Command) -> str:
    if isinstance(cmd, ModeCommand):
        return f"MODE {cmd.code}"
    if isinstance(cmd, ThresholdCommand):
        return f"THRESHOLD {cmd.relay} {cmd.counts}"
    if isinstance(cmd, RelayCommand):
        return f"RELAY {cmd.relay} {cmd.state.name}"
    raise TypeError(f"not a command: {cmd!r}")


def _expect_arity(tokens: list[str], n: int, columns: list[int]) -> None:
    if len(tokens) < n:
        raise ProtocolError(f"{tokens[0]} takes {n - 1} argument(s), got {len(tokens) - 1}",
                            columns[-1] + len(tokens[-1]))
    if len(tokens) > n:
        raise ProtocolError(f"unexpected token {tokens[n]!r}", columns[n])


def _parse_int(token: str, column: int, what: str) -> int:
    if not token.isdigit():
        raise ProtocolError(f"expected {what} (decimal digits), got {token!r}", column)
    return int(token)


def _parse_relay_index(token: str, column: int) -> int:
    idx = _parse_int(token, column, "relay index")
    if idx not in (0, 1, 2):
        raise ProtocolError(f"relay index out of range (0-2): {idx}", column)
    return idx


def encode_telemetry(snap: SensorSnapshot) -> str:
    """Canonical one-line JSON frame for a snapshot (no trailing newline)."""
    snap.validate()
    payload = {
        "ts": snap.timestamp,
        "temp": snap.temperature_c,
        "hum": snap.humidity_pct,
        "rain": 1 if snap.rain_wet else 0,
        "flow": float(snap.flow_lpm),
        "soil": list(snap.soil_adc),
        "relay": [int(r) for r in snap.relay],
        "mode": int(snap.mode),
    }
    return json.dumps(payload, separators=(",", ":"))


def parse_telemetry(line: Union[str, bytes]) -> SensorSnapshot:
    """Strict inverse of encode_telemetry; any deviation raises ProtocolError."""
    if isinstance(line, (bytes, bytearray)):
        try:
            line = bytes(line).decode("utf-8")
        except UnicodeDecodeError as e:
            raise ProtocolError(f"frame is not valid UTF-8: {e.reason}", e.start + 1) from None
    if "\n" in line.rstrip("\n"):
        raise ProtocolError("frame must be a single line", line.find("\n") + 1)
    line = line.rstrip("\n")

    try:
        obj = json.loads(
            line,
            object_pairs_hook=_reject_duplicate_keys,
            parse_constant=_reject_json_constant,
        )
    except json.JSONDecodeError as e:
        raise ProtocolError(f"invalid JSON: {e.msg}", e.colno) from None

    if not isinstance(obj, dict):
        raise ProtocolError("frame must be a JSON object")
    missing = [k for k in FRAME_KEYS if k not in obj]
    if missing:
        raise ProtocolError(f"missing key {missing[0]!r}")
    unknown = [k for k in obj if k not in FRAME_KEYS]
    if unknown:
        raise ProtocolError(f"unknown key {unknown[0]!r}")

    ts = _require_int(obj, "ts", 0, None)
    temp = obj["temp"]
    hum = obj["hum"]
    if (temp is None) != (hum is None):
        raise ProtocolError("temp and hum must be null together (sensor fails as a pair)")
    if temp is not None:
        temp = _require_int(obj, "temp", 0, 50)
        hum = _require_int(obj, "hum", 20, 90)
    rain = _require_int(obj, "rain", 0, 1)
    flow = obj["flow"]
    if isinstance(flow, bool) or not isinstance(flow, (int, float)):
        raise ProtocolError("flow must be a number")
    flow = float(flow)
    if not math.isfinite(flow) or flow < 0:
        raise ProtocolError("flow must be finite and >= 0")
    soil = _require_int_array(obj, "soil", 6, 0, ADC_MAX)
    relay = _require_int_array(obj, "relay", 3, 0, 1)
    mode = _require_int(obj, "mode", 1, 3)

    snap = SensorSnapshot(
        timestamp=ts,
        temperature_c=temp,
        humidity_pct=hum,
        rain_wet=bool(rain),
        flow_lpm=flow,
        soil_adc=tuple(soil),
        relay=tuple(RelayState(v) for v in relay),
        mode=Mode(mode),
    )
    snap.validate()
    return snap


def frame_dict(snap: SensorSnapshot) -> dict:
    """Frame as a plain dict in canonical key order (for HTTP payloads)."""
    return json.loads(encode_telemetry(snap))


def _reject_duplicate_keys(pairs):
    seen = set()
    for key, _ in pairs:
        if key in seen:
            raise ProtocolError(f"duplicate key {key!r}")
        seen.add(key)
    return dict(pairs)


def _reject_json_constant(name):
    raise ProtocolError(f"non-finite number {name} not allowed")


def _require_int(obj: dict, key: str, lo, hi) -> int:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ProtocolError(f"{key} must be an integer")
    if lo is not None and value < lo:
        raise ProtocolError(f"{key} out of range: {value}")
    if hi is not None and value > hi:
        raise ProtocolError(f"{key} out of range: {value}")
    return value


def _require_int_array(obj: dict, key: str, arity: int, lo: int, hi: int) -> list[int]:
    value = obj[key]
    if not isinstance(value, list):
        raise ProtocolError(f"{key} must be an array")
    if len(value) != arity:
        raise ProtocolError(f"{key} arity must be {arity}, got {len(value)}")
    out = []
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ProtocolError(f"{key}[{i}] must be an integer")
        if not (lo <= v <= hi):
            raise ProtocolError(f"{key}[{i}] out of range [{lo}, {hi}]: {v}")
        out.append(v)
    return out
