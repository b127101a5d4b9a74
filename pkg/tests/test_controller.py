import numpy as np
import pytest

from driptwin.controller import (
    Controller,
    ControllerConfig,
    PotPlan,
    RejectedCommand,
    classify_health,
    plan_duration,
    stuck_at_rail,
)
from driptwin.core import Mode, NotificationKind, RelayState, SensorSnapshot


def snap(ts, soil=(2000,) * 6, relay=(RelayState.OFF,) * 3, mode=Mode.AUTO,
         temp=24, hum=55):
    return SensorSnapshot(timestamp=ts, temperature_c=temp, humidity_pct=hum,
                          rain_wet=False, flow_lpm=0.0, soil_adc=soil,
                          relay=relay, mode=mode)


class Harness:
    def __init__(self, forecasts=None, cfg=None):
        self.sent: list[str] = []
        self.forecasts = forecasts
        self.controller = Controller(
            cfg or ControllerConfig(),
            send_line=self.sent.append,
            forecast_provider=(lambda: self.forecasts) if forecasts is not None else None,
        )

    def drain(self) -> list[str]:
        lines, self.sent[:] = list(self.sent), []
        return lines


class TestPlanDuration:
    def test_deficit_of_300_counts(self):
        # Oracle: ceil(0.1 * 300) = 30 with the clamp inactive.
        assert plan_duration(2800.0, 2500, ControllerConfig()) == 30.0

    def test_below_threshold_no_irrigation(self):
        assert plan_duration(2400.0, 2500, ControllerConfig()) == 0.0

    def test_clamped_at_maximum(self):
        assert plan_duration(4095.0, 2500, ControllerConfig()) == 120.0

    def test_clamped_at_minimum(self):
        assert plan_duration(2501.0, 2500, ControllerConfig()) == 5.0

    def test_tie_is_no_need(self):
        assert plan_duration(2500.0, 2500, ControllerConfig()) == 0.0

    def test_durations_always_in_band(self):
        cfg = ControllerConfig()
        for mean in np.linspace(0, 4095, 500):
            d = plan_duration(float(mean), 2500, cfg)
            assert d == 0.0 or cfg.dur_min_s <= d <= cfg.dur_max_s

    def test_pot_plan_invariant(self):
        with pytest.raises(ValueError):
            PotPlan(irrigate=False, duration_s=10.0)


class TestStuckDetection:
    def test_five_rail_readings_fail(self):
        assert stuck_at_rail([4095] * 5, window=5)
        assert stuck_at_rail([0] * 5, window=5)

    def test_alternating_readings_healthy(self):
        assert not stuck_at_rail([2400, 2600] * 3, window=5)

    def test_short_window_healthy(self):
        assert not stuck_at_rail([4095] * 4, window=5)

    def test_rail_must_be_consistent(self):
        assert not stuck_at_rail([0, 4095, 0, 4095, 0], window=5)

    def test_dht_single_glitch_is_healthy(self):
        frames = [snap(t) for t in range(1, 5)]
        failed = SensorSnapshot(5, None, None, False, 0.0, (2000,) * 6,
                                (RelayState.OFF,) * 3, Mode.AUTO)
        frames.append(failed)
        frames.append(snap(6))
        health = classify_health(frames[-5:], window=5)
        assert health["dht"]

    def test_dht_persistent_failure(self):
        frames = [SensorSnapshot(t, None, None, False, 0.0, (2000,) * 6,
                                 (RelayState.OFF,) * 3, Mode.AUTO) for t in range(1, 6)]
        assert not classify_health(frames, window=5)["dht"]


class TestDispatch:
    def test_mode_change_runs_entry_once(self):
        h = Harness()
        h.controller.set_mode(3)
        lines = h.drain()
        assert "MODE 3" in lines
        assert h.controller.last_mode is Mode.MANUAL
        # stable mode: re-issuing the same selection does not re-dispatch
        h.controller.set_mode(3)
        assert h.drain() == []

    def test_mode_change_emits_notification(self):
        h = Harness()
        h.controller.set_mode(1)
        kinds = [n.kind for n in h.controller.notifications]
        assert kinds.count(NotificationKind.MODE_CHANGED) == 1

    def test_invalid_code_keeps_mode(self):
        h = Harness()
        with pytest.raises(ValueError):
            h.controller.set_mode(7)
        assert h.controller.current_mode is Mode.AUTO

    def test_manual_entry_clears_stale_requests(self):
        h = Harness()
        h.controller.set_mode(3)
        lines = h.drain()
        assert lines.count("RELAY 0 OFF") == 1
        assert lines.count("RELAY 2 OFF") == 1


class TestAiMode:
    def test_plan_from_forecasts(self):
        forecasts = {0: np.full(30, 2800.0), 1: np.full(30, 2400.0), 2: np.full(30, 4095.0)}
        h = Harness(forecasts=forecasts)
        h.controller.set_mode(1)
        plan = h.controller.plan
        assert plan.pots[0] == PotPlan(True, 30.0)
        assert plan.pots[1] == PotPlan(False, 0.0)
        assert plan.pots[2] == PotPlan(True, 120.0)
        lines = h.drain()
        assert "RELAY 0 ON" in lines and "RELAY 2 ON" in lines
        assert "RELAY 1 ON" not in lines

    def test_plan_timers_send_off_commands(self):
        forecasts = {0: np.full(30, 2800.0), 1: None, 2: None}
        h = Harness(forecasts=forecasts)
        h.controller.set_mode(1)
        h.drain()
        h.controller.on_telemetry(snap(10, relay=(RelayState.ON, RelayState.OFF, RelayState.OFF),
                                        mode=Mode.AI, soil=(2000,) * 6))
        assert "RELAY 0 OFF" not in h.drain()
        h.controller.on_telemetry(snap(31, relay=(RelayState.ON, RelayState.OFF, RelayState.OFF),
                                        mode=Mode.AI, soil=(2000,) * 6))
        assert "RELAY 0 OFF" in h.drain()

    def test_missing_model_falls_back_with_notification(self):
        forecasts = {0: None, 1: np.full(30, 2000.0), 2: None}
        h = Harness(forecasts=forecasts)
        h.controller.set_mode(1)
        assert h.controller.ai_fallback_pots == {0, 2}
        kinds = [n.kind for n in h.controller.notifications]
        assert kinds.count(NotificationKind.DIAGNOSTIC) == 2
        h.drain()
        # fallback pots follow plain threshold logic from the backend
        h.controller.on_telemetry(snap(5, soil=(3000,) * 6, mode=Mode.AI))
        lines = h.drain()
        assert "RELAY 0 ON" in lines and "RELAY 2 ON" in lines
        assert "RELAY 1 ON" not in lines


class TestManualMode:
    def test_requests_forwarded_in_manual(self):
        h = Harness()
        h.controller.set_mode(3)
        h.drain()
        h.controller.request_manual_relay(1, True)
        assert h.drain() == ["RELAY 1 ON"]

    def test_rejected_outside_manual(self):
        h = Harness()
        h.controller.set_mode(1)
        with pytest.raises(RejectedCommand, match="MANUAL"):
            h.controller.request_manual_relay(1, True)

    def test_no_input_no_commands(self):
        h = Harness()
        h.controller.set_mode(3)
        h.drain()
        h.controller.on_telemetry(snap(5, mode=Mode.MANUAL))
        assert h.drain() == []


class TestConnectivity:
    def test_loss_in_auto_forces_nothing(self):
        h = Harness()
        h.controller.set_connectivity(False)
        assert all("RELAY" not in line for line in h.drain())
        assert h.controller.current_mode is Mode.AUTO

    def test_loss_in_manual_closes_all_valves(self):
        h = Harness()
        h.controller.set_mode(3)
        h.drain()
        h.controller.set_connectivity(False)
        lines = h.drain()
        assert [f"RELAY {i} OFF" for i in range(3)] == [l for l in lines if l.startswith("RELAY")]

    def test_loss_never_changes_mode(self):
        h = Harness()
        h.controller.set_mode(1)
        h.controller.set_connectivity(False)
        assert h.controller.current_mode is Mode.AI
        h.controller.set_connectivity(True)
        assert h.controller.current_mode is Mode.AI

    def test_restore_resyncs_and_notifies(self):
        h = Harness()
        h.controller.set_connectivity(False)
        h.drain()
        h.controller.set_connectivity(True)
        lines = h.drain()
        assert "MODE 2" in lines
        assert any(l.startswith("THRESHOLD") for l in lines)
        kinds = [n.kind for n in h.controller.notifications]
        assert NotificationKind.CONNECTIVITY_LOST in kinds
        assert NotificationKind.CONNECTIVITY_RESTORED in kinds

    def test_offline_rejects_user_writes(self):
        h = Harness()
        h.controller.set_mode(3)
        h.controller.set_connectivity(False)
        with pytest.raises(RejectedCommand):
            h.controller.request_manual_relay(0, True)


class TestFailsafe:
    def stuck_frames(self, h, n=5, start=1, channel=2):
        for t in range(start, start + n):
            soil = [2000] * 6
            soil[channel] = 4095
            h.controller.on_telemetry(snap(t, soil=tuple(soil),
                                            relay=(RelayState.OFF, RelayState.ON, RelayState.OFF)))

    def test_failure_halts_irrigation_and_notifies(self):
        h = Harness()
        self.stuck_frames(h)
        lines = h.drain()
        assert not h.controller.sensor_health["soil2"]
        assert h.controller.failsafe_active
        for i in range(3):
            assert f"RELAY {i} OFF" in lines
            assert f"THRESHOLD {i} 4095" in lines
        kinds = [n.kind for n in h.controller.notifications]
        assert NotificationKind.SENSOR_FAILURE in kinds

    def test_failure_notified_once_per_onset(self):
        h = Harness()
        self.stuck_frames(h, n=8)
        kinds = [n.kind for n in h.controller.notifications]
        assert kinds.count(NotificationKind.SENSOR_FAILURE) == 1

    def test_manual_on_rejected_while_failed(self):
        h = Harness()
        h.controller.set_mode(3)
        self.stuck_frames(h)
        with pytest.raises(RejectedCommand, match="halted"):
            h.controller.request_manual_relay(0, True)

    def test_recovery_restores_thresholds(self):
        h = Harness()
        h.controller.set_threshold(1, 2600)
        self.stuck_frames(h)
        h.drain()
        for t in range(10, 16):
            h.controller.on_telemetry(snap(t, soil=(2000,) * 6))
        lines = h.drain()
        assert not h.controller.failsafe_active
        assert "THRESHOLD 1 2600" in lines

    def test_threshold_writes_deferred_during_failsafe(self):
        h = Harness()
        self.stuck_frames(h)
        h.drain()
        h.controller.set_threshold(0, 3000)
        assert h.drain() == []  # stored, pushed on recovery
        assert h.controller.thresholds[0] == 3000


class TestTelemetryCycle:
    def test_relay_edges_notify_exactly_once(self):
        h = Harness()
        on = (RelayState.ON, RelayState.OFF, RelayState.OFF)
        off = (RelayState.OFF,) * 3
        for t, relay in enumerate([off, on, on, on, off, on], start=1):
            h.controller.on_telemetry(snap(t, relay=relay, soil=(2600, 2600) + (2000,) * 4))
        kinds = [n.kind for n in h.controller.notifications]
        assert kinds.count(NotificationKind.RELAY_ACTIVATED) == 2
        assert kinds.count(NotificationKind.RELAY_DEACTIVATED) == 1

    def test_divergence_flagged_after_streak(self):
        h = Harness()
        # soil says irrigate (avg 3000 > 2500) but the device reports OFF
        for t in range(1, 4):
            h.controller.on_telemetry(snap(t, soil=(3000,) * 6))
        notes = [n for n in h.controller.notifications
                 if n.kind is NotificationKind.DIAGNOSTIC]
        assert len(notes) == 3  # one per pot, flagged once each

    def test_agreement_never_flags(self):
        h = Harness()
        on = (RelayState.ON,) * 3
        for t in range(1, 6):
            h.controller.on_telemetry(snap(t, soil=(3000,) * 6, relay=on))
        assert all(n.kind is not NotificationKind.DIAGNOSTIC
                   for n in h.controller.notifications)
