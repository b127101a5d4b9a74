import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driptwin.core import RelayState
from driptwin.sim import (
    PotState,
    SimConfig,
    WeatherState,
    initial_weather,
    read_dht,
    read_flow,
    read_soil_adc,
    step_pot,
    step_pot_ex,
    step_weather,
)


def make_weather(t=20.0, h=50.0, raining=False, rain_rate=0.0):
    return WeatherState(temperature_c=t, humidity_pct=h, raining=raining,
                        rain_rate=rain_rate if raining else 0.0)


class TestWeather:
    def test_constant_config_gives_constant_weather(self):
        cfg = SimConfig(t_amp=0.0, h_amp=0.0, rain_mean_dry_s=0.0)
        rng = np.random.default_rng(0)
        w = initial_weather(cfg)
        for t in (0.0, 3600.0, 86399.0, 123456.0):
            w2 = step_weather(w, t, cfg, rng)
            assert w2.temperature_c == cfg.t_mean
            assert w2.humidity_pct == cfg.h_mean
            assert not w2.raining

    def test_quarter_day_sinusoid(self):
        # Independent oracle: T = 20 + 8*sin(2*pi*21600/86400) = 20 + 8*1 = 28.
        cfg = SimConfig(t_mean=20.0, t_amp=8.0, rain_mean_dry_s=0.0)
        w = step_weather(initial_weather(cfg), 21600.0, cfg, np.random.default_rng(0))
        assert w.temperature_c == pytest.approx(28.0, abs=1e-12)

    def test_humidity_anti_correlated_and_clamped(self):
        cfg = SimConfig(h_mean=90.0, h_amp=30.0, rain_mean_dry_s=0.0)
        rng = np.random.default_rng(0)
        noon = step_weather(initial_weather(cfg), 21600.0, cfg, rng)
        threequarter = step_weather(noon, 64800.0, cfg, rng)
        assert noon.humidity_pct == pytest.approx(60.0)
        assert threequarter.humidity_pct == 100.0  # 90 + 30 clamped

    def test_same_seed_same_trajectory(self):
        cfg = SimConfig(rain_mean_dry_s=600.0, rain_mean_wet_s=120.0)
        states = []
        for _ in range(2):
            rng = np.random.default_rng(42)
            w = initial_weather(cfg)
            trajectory = []
            for k in range(1, 500):
                w = step_weather(w, k * cfg.dt, cfg, rng)
                trajectory.append((w.temperature_c, w.humidity_pct, w.raining))
            states.append(trajectory)
        assert states[0] == states[1]

    def test_rain_rate_only_while_raining(self):
        cfg = SimConfig(rain_mean_dry_s=1.0, rain_mean_wet_s=1e12, dt=1.0)
        rng = np.random.default_rng(1)
        w = step_weather(initial_weather(cfg), 1.0, cfg, rng)
        assert w.raining and w.rain_rate == cfg.rain_rate


class TestPotStep:
    def test_all_fluxes_zero_keeps_moisture(self):
        cfg = SimConfig(e0=0.0, d=0.0)
        p = PotState(moisture=0.2)
        p2 = step_pot(p, make_weather(), valve_open=False, cfg=cfg)
        assert p2.moisture == 0.2

    def test_euler_step_with_valve_open(self):
        # Oracle: m' = 0.20 + 10 * 0.001 = 0.21 with every other flux zero.
        cfg = SimConfig(dt=10.0, q_irr=0.001, e0=0.0, d=0.0)
        p = step_pot(PotState(moisture=0.20), make_weather(), True, cfg)
        assert p.moisture == pytest.approx(0.21, abs=1e-15)

    def test_clamp_at_saturation(self):
        cfg = SimConfig(dt=10.0, q_irr=1.0, e0=0.0, d=0.0)
        p, clamped = step_pot_ex(PotState(moisture=0.45), make_weather(), True, cfg)
        assert p.moisture == 0.45
        assert clamped

    def test_clamp_at_zero(self):
        cfg = SimConfig(dt=10.0, q_irr=0.0, e0=1.0, t0=0.0, d=0.0)
        p, clamped = step_pot_ex(PotState(moisture=0.01), make_weather(t=30, h=0), False, cfg)
        assert p.moisture == 0.0
        assert clamped

    @given(
        schedule=st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=200),
        m0=st.floats(min_value=0.0, max_value=0.45),
    )
    @settings(max_examples=60, deadline=None)
    def test_moisture_never_leaves_bounds(self, schedule, m0):
        cfg = SimConfig(dt=10.0, q_irr=0.01, e0=1e-4, t0=0.0, d=1e-3, rain_rate=0.02)
        p = PotState(moisture=m0)
        for valve, raining in schedule:
            w = make_weather(t=35.0, h=10.0, raining=raining, rain_rate=cfg.rain_rate)
            p = step_pot(p, w, valve, cfg)
            assert 0.0 <= p.moisture <= p.m_sat

    def test_water_accounting_without_losses(self):
        cfg = SimConfig(dt=2.0, q_irr=1e-3, e0=0.0, d=0.0)
        p = PotState(moisture=0.1)
        open_ticks = 0
        for k in range(100):
            valve = k % 3 == 0
            open_ticks += valve
            p = step_pot(p, make_weather(), valve, cfg)
        assert p.moisture == pytest.approx(0.1 + cfg.dt * cfg.q_irr * open_ticks, abs=1e-12)


class TestSoilAdc:
    def test_dry_endpoint(self):
        cfg = SimConfig(noise_sigma=0.0)
        rng = np.random.default_rng(0)
        assert read_soil_adc(PotState(moisture=0.0), 0, cfg, rng) == 3500

    def test_wet_endpoint(self):
        cfg = SimConfig(noise_sigma=0.0)
        rng = np.random.default_rng(0)
        assert read_soil_adc(PotState(moisture=0.45), 0, cfg, rng) == 1200

    def test_midpoint(self):
        # Oracle: 3500 - (3500-1200) * 0.5 = 2350.
        cfg = SimConfig(noise_sigma=0.0)
        rng = np.random.default_rng(0)
        assert read_soil_adc(PotState(moisture=0.225), 0, cfg, rng) == 2350

    def test_noiseless_reading_monotone_in_moisture(self):
        cfg = SimConfig(noise_sigma=0.0)
        rng = np.random.default_rng(0)
        values = [read_soil_adc(PotState(moisture=m), 0, cfg, rng)
                  for m in np.linspace(0.0, 0.45, 50)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_channels_draw_independent_noise(self):
        cfg = SimConfig(noise_sigma=25.0)
        rng = np.random.default_rng(7)
        a = read_soil_adc(PotState(moisture=0.2), 0, cfg, rng)
        b = read_soil_adc(PotState(moisture=0.2), 1, cfg, rng)
        assert a != b  # two draws from one stream; equal would mean a shared sample

    def test_clamped_to_adc_range(self):
        cfg = SimConfig(noise_sigma=0.0, adc_dry=4095, adc_wet=0)
        rng = np.random.default_rng(0)
        assert read_soil_adc(PotState(moisture=0.0), 0, cfg, rng) == 4095
        assert read_soil_adc(PotState(moisture=0.45), 0, cfg, rng) == 0

    def test_bad_channel_rejected(self):
        with pytest.raises(ValueError):
            read_soil_adc(PotState(moisture=0.2), 6, SimConfig(), np.random.default_rng(0))


class TestFlow:
    def test_no_flow_when_all_off(self):
        assert read_flow([RelayState.OFF] * 3, SimConfig()) == (0.0, 0.0)

    def test_single_valve(self):
        # Oracle: f = 7.5 Hz per L/min at 450 pulses/L -> (2.0, 15.0).
        flow, hz = read_flow([RelayState.ON, RelayState.OFF, RelayState.OFF],
                             SimConfig(lpm_per_valve=2.0))
        assert flow == pytest.approx(2.0)
        assert hz == pytest.approx(15.0)

    def test_three_valves_superpose(self):
        flow, hz = read_flow([RelayState.ON] * 3, SimConfig(lpm_per_valve=2.0))
        assert flow == pytest.approx(6.0)
        assert hz == pytest.approx(45.0)


class TestDht:
    def test_truncation(self):
        assert read_dht(make_weather(t=24.7, h=55.2)) == (24, 55)

    def test_humidity_clamped_to_band(self):
        assert read_dht(make_weather(t=25.0, h=95.0))[1] == 90
        assert read_dht(make_weather(t=25.0, h=5.0))[1] == 20

    def test_temperature_clamped_to_band(self):
        assert read_dht(make_weather(t=-3.0, h=50.0))[0] == 0
        assert read_dht(make_weather(t=60.0, h=50.0))[0] == 50


class TestConfigValidation:
    def test_calibration_order_enforced(self):
        with pytest.raises(ValueError):
            SimConfig(adc_dry=1000, adc_wet=2000).validate()

    def test_dt_bounds(self):
        with pytest.raises(ValueError):
            SimConfig(dt=0.0).validate()
        with pytest.raises(ValueError):
            SimConfig(dt=11.0).validate()
