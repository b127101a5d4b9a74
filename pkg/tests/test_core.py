import pytest
from hypothesis import given
from hypothesis import strategies as st

from driptwin.core import (
    Mode,
    PotId,
    RelayState,
    SensorSnapshot,
    parse_mode,
    soil_channels_for_pot,
)


class TestParseMode:
    def test_code_1_is_ai(self):
        assert parse_mode(1) is Mode.AI

    def test_code_3_is_manual(self):
        assert parse_mode(3) is Mode.MANUAL

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            parse_mode(0)
        with pytest.raises(ValueError):
            parse_mode(4)

    @pytest.mark.parametrize("mode", list(Mode))
    def test_round_trip(self, mode):
        assert parse_mode(int(mode)) is mode

    def test_codes_are_fixed(self):
        assert int(Mode.AI) == 1
        assert int(Mode.AUTO) == 2
        assert int(Mode.MANUAL) == 3


class TestRelayState:
    def test_active_low_mapping(self):
        assert RelayState.ON.electrical == "LOW"
        assert RelayState.OFF.electrical == "HIGH"

    @pytest.mark.parametrize("state", list(RelayState))
    def test_electrical_round_trip(self, state):
        assert RelayState.from_electrical(state.electrical) is state

    def test_wire_values(self):
        assert int(RelayState.OFF) == 0
        assert int(RelayState.ON) == 1


class TestPotId:
    def test_exactly_three_pots(self):
        with pytest.raises(ValueError):
            PotId(3)
        with pytest.raises(ValueError):
            PotId(-1)

    @pytest.mark.parametrize("idx,label,channels", [
        (0, "pot_1", (0, 1)),
        (1, "pot_2", (2, 3)),
        (2, "pot_3", (4, 5)),
    ])
    def test_bijection(self, idx, label, channels):
        pot = PotId(idx)
        assert pot.label == label
        assert pot.relay_channel == idx
        assert pot.soil_channels == channels
        assert soil_channels_for_pot(idx) == channels

    def test_channel_pairs_cover_all_six(self):
        seen = [ch for i in range(3) for ch in soil_channels_for_pot(i)]
        assert sorted(seen) == list(range(6))


class TestSnapshotValidation:
    def test_valid_snapshot_passes(self, sample_snapshot):
        sample_snapshot.validate()

    def test_soil_out_of_range(self, sample_snapshot):
        bad = SensorSnapshot(**{**_as_kwargs(sample_snapshot),
                                "soil_adc": (4096, 0, 0, 0, 0, 0)})
        with pytest.raises(ValueError, match="soil"):
            bad.validate()

    def test_dht_fails_as_pair(self, sample_snapshot):
        bad = SensorSnapshot(**{**_as_kwargs(sample_snapshot), "temperature_c": None})
        with pytest.raises(ValueError, match="pair"):
            bad.validate()

    def test_zone_average(self, sample_snapshot):
        assert sample_snapshot.zone_average(0) == 2990.0
        assert sample_snapshot.zone_average(2) == 2595.0

    @given(st.integers(min_value=-5, max_value=-1))
    def test_negative_timestamp_rejected(self, ts):
        snap = SensorSnapshot(ts, 20, 50, False, 0.0, (0,) * 6,
                              (RelayState.OFF,) * 3, Mode.AUTO)
        with pytest.raises(ValueError):
            snap.validate()


def _as_kwargs(snap: SensorSnapshot) -> dict:
    return {
        "timestamp": snap.timestamp,
        "temperature_c": snap.temperature_c,
        "humidity_pct": snap.humidity_pct,
        "rain_wet": snap.rain_wet,
        "flow_lpm": snap.flow_lpm,
        "soil_adc": snap.soil_adc,
        "relay": snap.relay,
        "mode": snap.mode,
    }
