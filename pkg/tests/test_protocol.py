import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driptwin.core import Mode, RelayState
from driptwin.protocol import (
    ModeCommand,
    ProtocolError,
    RelayCommand,
    ThresholdCommand,
    encode_telemetry,
    format_command,
    parse_command,
    parse_telemetry,
)
from tests.conftest import snapshots

# Canonical frame for the fixed example snapshot; independently rebuilt below.
CANONICAL_LINE = ('{"ts":100,"temp":24,"hum":55,"rain":0,"flow":2.0,'
                  '"soil":[3000,2980,2100,2120,2600,2590],"relay":[1,0,0],"mode":2}')


class TestCommandGrammar:
    def test_mode_command(self):
        assert parse_command("MODE 2") == ModeCommand(2)

    def test_relay_command(self):
        assert parse_command("RELAY 2 OFF") == RelayCommand(2, RelayState.OFF)

    def test_threshold_command(self):
        assert parse_command("THRESHOLD 1 2600") == ThresholdCommand(1, 2600)

    def test_relay_index_out_of_range(self):
        with pytest.raises(ProtocolError, match="relay index out of range"):
            parse_command("THRESHOLD 5 100")

    def test_threshold_counts_out_of_range(self):
        with pytest.raises(ProtocolError, match="out of range"):
            parse_command("THRESHOLD 1 4096")

    def test_mode_code_out_of_range(self):
        with pytest.raises(ProtocolError):
            parse_command("MODE 4")

    def test_lowercase_keyword_rejected(self):
        with pytest.raises(ProtocolError, match="unknown keyword"):
            parse_command("mode 2")

    def test_double_space_rejected(self):
        with pytest.raises(ProtocolError):
            parse_command("MODE  2")

    def test_error_carries_column(self):
        with pytest.raises(ProtocolError) as exc:
            parse_command("RELAY 0 MAYBE")
        assert exc.value.column == 9

    def test_trailing_garbage_rejected(self):
        with pytest.raises(ProtocolError, match="unexpected token"):
            parse_command("MODE 2 NOW")

    @pytest.mark.parametrize("cmd", [
        ModeCommand(1),
        ModeCommand(3),
        ThresholdCommand(0, 0),
        ThresholdCommand(2, 4095),
        RelayCommand(1, RelayState.ON),
        RelayCommand(0, RelayState.OFF),
    ])
    def test_format_parse_round_trip(self, cmd):
        assert parse_command(format_command(cmd)) == cmd


class TestTelemetryCodec:
    def test_canonical_example(self, sample_snapshot):
        line = encode_telemetry(sample_snapshot)
        assert line == CANONICAL_LINE
        # independent oracle: rebuild the same dict through the json module
        assert json.loads(line) == {
            "ts": 100, "temp": 24, "hum": 55, "rain": 0, "flow": 2.0,
            "soil": [3000, 2980, 2100, 2120, 2600, 2590],
            "relay": [1, 0, 0], "mode": 2,
        }

    def test_key_order_is_canonical(self, sample_snapshot):
        keys = list(json.loads(encode_telemetry(sample_snapshot),
                               object_pairs_hook=lambda pairs: [k for k, _ in pairs]))
        assert keys == ["ts", "temp", "hum", "rain", "flow", "soil", "relay", "mode"]

    def test_round_trip_identity(self, sample_snapshot):
        assert parse_telemetry(encode_telemetry(sample_snapshot)) == sample_snapshot

    def test_unreadable_dht_encodes_null(self, sample_snapshot):
        snap = parse_telemetry(CANONICAL_LINE.replace('"temp":24,"hum":55', '"temp":null,"hum":null'))
        assert snap.temperature_c is None and snap.humidity_pct is None
        assert '"temp":null' in encode_telemetry(snap)

    def test_soil_arity_error(self):
        bad = CANONICAL_LINE.replace("[3000,2980,2100,2120,2600,2590]",
                                     "[3000,2980,2100,2120,2600]")
        with pytest.raises(ProtocolError, match="arity"):
            parse_telemetry(bad)

    def test_unknown_key_rejected(self):
        bad = CANONICAL_LINE[:-1] + ',"extra":1}'
        with pytest.raises(ProtocolError, match="unknown key"):
            parse_telemetry(bad)

    def test_missing_key_rejected(self):
        bad = CANONICAL_LINE.replace('"rain":0,', "")
        with pytest.raises(ProtocolError, match="missing key"):
            parse_telemetry(bad)

    def test_duplicate_key_rejected(self):
        bad = CANONICAL_LINE[:-1] + ',"mode":2}'
        with pytest.raises(ProtocolError, match="duplicate"):
            parse_telemetry(bad)

    def test_wrong_type_rejected(self):
        bad = CANONICAL_LINE.replace('"mode":2', '"mode":"AUTO"')
        with pytest.raises(ProtocolError):
            parse_telemetry(bad)

    def test_bool_is_not_an_integer(self):
        bad = CANONICAL_LINE.replace('"rain":0', '"rain":false')
        with pytest.raises(ProtocolError):
            parse_telemetry(bad)

    def test_non_finite_flow_rejected(self):
        bad = CANONICAL_LINE.replace('"flow":2.0', '"flow":Infinity')
        with pytest.raises(ProtocolError):
            parse_telemetry(bad)

    def test_rejection_carries_position(self):
        with pytest.raises(ProtocolError) as exc:
            parse_telemetry("not json at all")
        assert isinstance(exc.value.column, int) and exc.value.column >= 1

    def test_invalid_utf8_rejected_with_position(self):
        with pytest.raises(ProtocolError) as exc:
            parse_telemetry(b'{"ts":1\xff}')
        assert exc.value.column == 8

    @given(snap=snapshots())
    @settings(max_examples=200, deadline=None)
    def test_round_trip_property(self, snap):
        assert parse_telemetry(encode_telemetry(snap)) == snap

    @given(snap=snapshots())
    @settings(max_examples=100, deadline=None)
    def test_canonical_encoding_unique(self, snap):
        line = encode_telemetry(snap)
        assert encode_telemetry(parse_telemetry(line)) == line

    @given(line=st.binary(max_size=200))
    @settings(max_examples=300, deadline=None)
    def test_parser_never_aborts_on_garbage(self, line):
        try:
            parse_telemetry(line)
        except ProtocolError as e:
            assert e.column >= 1

    @given(line=st.text(max_size=200))
    @settings(max_examples=300, deadline=None)
    def test_command_parser_never_aborts_on_garbage(self, line):
        try:
            parse_command(line)
        except ProtocolError as e:
            assert e.column >= 1
