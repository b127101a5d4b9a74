"""Seeded stand-in physics for the greenhouse: weather, pot moisture, transducers.

The soil model is a first-order leaky bucket stepped with explicit Euler;
it is the simplest dynamics that still shows slow drying between irrigations
and sharp jumps while a valve is open.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import ADC_MAX, RelayState, count_on

SECONDS_PER_DAY = 86400.0


@dataclass(frozen=True)
class WeatherState:
    temperature_c: float
    humidity_pct: float
    raining: bool
    rain_rate: float  # soil-moisture fraction per second while raining, else 0.0


@dataclass(frozen=True)
class PotState:
    moisture: float          # volumetric fraction
    m_sat: float = 0.45      # saturation; moisture is clamped to [0, m_sat]


@dataclass
class SimConfig:
    """Tunable model constants; the `[sim]` config section mirrors these fields."""

    dt: float = 1.0                    # seconds per tick (explicit Euler step)
    # weather drivers
    t_mean: float = 22.0               # degC, diurnal midline
    t_amp: float = 6.0                 # degC, diurnal amplitude
    h_mean: float = 55.0               # %RH midline
    h_amp: float = 15.0                # %RH amplitude (anti-phase with temperature)
    rain_rate: float = 4e-5            # fraction/s added to every pot while raining
    rain_mean_dry_s: float = 86400.0   # mean gap between rain events; 0 disables rain
    rain_mean_wet_s: float = 1800.0    # mean rain event length
    # pot dynamics
    m_sat: float = 0.45
    m0: tuple[float, float, float] = (0.35, 0.30, 0.25)  # initial moisture per pot
    e0: float = 6e-7                   # evaporation coefficient, fraction per degC per s
    t0: float = 5.0                    # evaporation onset temperature, degC
    d: float = 1e-6                    # drainage rate, per s
    q_irr: float = 1e-3                # irrigation inflow, fraction/s per open valve
    # transducers
    adc_dry: int = 3500                # counts at moisture 0
    adc_wet: int = 1200                # counts at saturation
    noise_sigma: float = 8.0           # ADC noise, counts
    pulses_per_l: float = 450.0        # flow-meter pulses per liter
    lpm_per_valve: float = 2.0         # L/min contributed by each open valve
    seed: int = 0

    def validate(self) -> None:
        if self.dt <= 0 or self.dt > 10.0:
            raise ValueError("dt must be in (0, 10] seconds")
        if self.adc_dry <= self.adc_wet:
            raise ValueError("adc_dry must exceed adc_wet")
        if not (0 < self.m_sat <= 1.0):
            raise ValueError("m_sat must be in (0, 1]")
        if any(not (0.0 <= m <= self.m_sat) for m in self.m0):
            raise ValueError("initial moisture must lie in [0, m_sat]")
        if self.q_irr < 0 or self.rain_rate < 0:
            raise ValueError("inflow rates must be >= 0")
        if self.lpm_per_valve < 0 or self.pulses_per_l <= 0:
            raise ValueError("flow constants must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def initial_weather(cfg: SimConfig) -> WeatherState:
    return WeatherState(
        temperature_c=cfg.t_mean,
        humidity_pct=_clamp(cfg.h_mean, 0.0, 100.0),
        raining=False,
        rain_rate=0.0,
    )


def step_weather(w: WeatherState, t: float, cfg: SimConfig, rng: np.random.Generator) -> WeatherState:
    """Weather at sim time t: diurnal sinusoid plus a seeded on/off rain process.

    One uniform variate is consumed per call regardless of outcome, so a fixed
    seed yields an identical weather trajectory for any config.
    """
    phase = math.sin(2.0 * math.pi * t / SECONDS_PER_DAY)
    temperature = cfg.t_mean + cfg.t_amp * phase
    humidity = _clamp(cfg.h_mean - cfg.h_amp * phase, 0.0, 100.0)

    u = rng.random()
    if w.raining:
        p_stop = min(1.0, cfg.dt / cfg.rain_mean_wet_s) if cfg.rain_mean_wet_s > 0 else 1.0
        raining = u >= p_stop
    else:
        p_start = min(1.0, cfg.dt / cfg.rain_mean_dry_s) if cfg.rain_mean_dry_s > 0 else 0.0
        raining = u < p_start
    return WeatherState(
        temperature_c=temperature,
        humidity_pct=humidity,
        raining=raining,
        rain_rate=cfg.rain_rate if raining else 0.0,
    )


def step_pot(p: PotState, w: WeatherState, valve_open: bool, cfg: SimConfig) -> PotState:
    state, _ = step_pot_ex(p, w, valve_open, cfg)
    return state


def step_pot_ex(p: PotState, w: WeatherState, valve_open: bool, cfg: SimConfig) -> tuple[PotState, bool]:
    """One Euler step of the moisture balance; returns (state, hit_clamp).

    m' = m + dt * ( q_irr*[valve] + rain_rate*[raining]
                    - e0*max(0, T - t0)*(1 - H/100) - d*m ),  clamped to [0, m_sat].
    """
    inflow = (cfg.q_irr if valve_open else 0.0) + (w.rain_rate if w.raining else 0.0)
    evap = cfg.e0 * max(0.0, w.temperature_c - cfg.t0) * (1.0 - w.humidity_pct / 100.0)
    drain = cfg.d * p.moisture
    m_next = p.moisture + cfg.dt * (inflow - evap - drain)
    clamped = m_next < 0.0 or m_next > p.m_sat
    m_next = _clamp(m_next, 0.0, p.m_sat)
    return replace(p, moisture=m_next), clamped


def read_soil_adc(p: PotState, channel: int, cfg: SimConfig, rng: np.random.Generator) -> int:
    """Raw counts from one probe: linear dry->wet map plus per-channel Gaussian noise."""
    if channel not in range(6):
        raise ValueError(f"soil channel must be 0..5, got {channel}")
    span = cfg.adc_dry - cfg.adc_wet
    ideal = cfg.adc_dry - span * (p.moisture / p.m_sat)
    noisy = ideal + rng.normal(0.0, cfg.noise_sigma)
    return int(_clamp(round(noisy), 0, ADC_MAX))


def read_flow(relays: Sequence[RelayState], cfg: SimConfig) -> tuple[float, float]:
    """(flow L/min, pulse Hz) for the shared supply line; flow adds per open valve."""
    flow_lpm = cfg.lpm_per_valve * count_on(relays)
    pulse_hz = flow_lpm * cfg.pulses_per_l / 60.0
    return flow_lpm, pulse_hz


def read_dht(w: WeatherState) -> tuple[int, int]:
    """Integer (temperature degC, humidity %RH), clamped to the sensor's usable band."""
    temperature = int(_clamp(w.temperature_c, 0.0, 50.0))
    humidity = int(_clamp(w.humidity_pct, 20.0, 90.0))
    return temperature, humidity


def _clamp(x, lo, hi):
    return lo if x < lo else hi if x > hi else x
