"""Shared fixtures and hypothesis strategies."""

from __future__ import annotations

import hypothesis.strategies as st
import pytest

from driptwin.core import Mode, RelayState, SensorSnapshot


@st.composite
def snapshots(draw, ts=None):
    """Arbitrary valid sensor snapshot (DHT readable or failed as a pair)."""
    readable = draw(st.booleans())
    if readable:
        temp = draw(st.integers(min_value=0, max_value=50))
        hum = draw(st.integers(min_value=20, max_value=90))
    else:
        temp = hum = None
    relays = draw(st.tuples(*[st.sampled_from([RelayState.OFF, RelayState.ON])] * 3))
    flow = draw(st.floats(min_value=0.0, max_value=30.0, allow_nan=False, allow_infinity=False))
    return SensorSnapshot(
        timestamp=draw(st.integers(min_value=0, max_value=10 ** 9)) if ts is None else ts,
        temperature_c=temp,
        humidity_pct=hum,
        rain_wet=draw(st.booleans()),
        flow_lpm=flow,
        soil_adc=tuple(draw(st.lists(st.integers(0, 4095), min_size=6, max_size=6))),
        relay=relays,
        mode=draw(st.sampled_from([Mode.AI, Mode.AUTO, Mode.MANUAL])),
    )


@pytest.fixture
def sample_snapshot() -> SensorSnapshot:
    """The canonical frame example used across protocol docs and tests."""
    return SensorSnapshot(
        timestamp=100,
        temperature_c=24,
        humidity_pct=55,
        rain_wet=False,
        flow_lpm=2.0,
        soil_adc=(3000, 2980, 2100, 2120, 2600, 2590),
        relay=(RelayState.ON, RelayState.OFF, RelayState.OFF),
        mode=Mode.AUTO,
    )
