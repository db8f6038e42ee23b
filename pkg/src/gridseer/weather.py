"""Synthetic weather sampling and the solar production model.

One WeatherSample describes system-wide conditions for an hour: the
clear-sky irradiance the panels could see, ambient temperature, and cloud
cover. Production of a plant rated p_rated follows

    P = p_rated * (G/1000) * (1 - 0.004*(T_cell - 25)) * (1 - 0.75*cloud)

with the cell temperature raised above ambient by absorbed irradiance.
Actual output adds Gaussian noise; day-ahead committed output applies the
same formula to an error-contaminated weather forecast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

G_CLEAR_PEAK = 1000.0  # W/m^2 at solar noon
CELL_TEMP_COEFF = 0.03  # deg C rise per W/m^2 of absorbed irradiance
TEMP_DERATE = 0.004  # fractional output loss per deg C above 25
CLOUD_DERATE = 0.75  # fractional output loss at full overcast
ACTUAL_NOISE_FRAC = 0.05  # sigma of production noise, fraction of rating
FORECAST_CLOUD_SIGMA = 0.30  # day-ahead cloud forecasts are poor
FORECAST_TEMP_SIGMA = 2.0


@dataclass(frozen=True)
class WeatherSample:
    irradiance: float  # clear-sky W/m^2 for the hour
    ambient_temp: float  # deg C
    cloud_cover: float  # [0, 1]
    hour: int  # 0..23

    def __post_init__(self):
        if self.irradiance < 0:
            raise ValidationError("irradiance must be >= 0")
        if not (0.0 <= self.cloud_cover <= 1.0):
            raise ValidationError("cloud_cover must lie in [0, 1]")


def clear_sky_irradiance(hour: float) -> float:
    """Clear-sky irradiance profile: zero at night, peaking at solar noon."""
    if hour <= 6.0 or hour >= 18.0:
        return 0.0
    return G_CLEAR_PEAK * math.sin(math.pi * (hour - 6.0) / 12.0)


def sample_day_weather(rng: np.random.Generator, n_hours: int = 24) -> list[WeatherSample]:
    """One synthetic day: a per-day cloud regime with hourly jitter."""
    cloud_base = float(rng.beta(2.0, 3.0))
    temp_base = float(rng.normal(18.0, 4.0))
    samples = []
    for hour in range(n_hours):
        cloud = float(np.clip(cloud_base + rng.normal(0.0, 0.08), 0.0, 1.0))
        temp = temp_base + 7.0 * math.sin(math.pi * max(0.0, hour - 5.0) / 16.0) \
            + float(rng.normal(0.0, 1.0))
        g = clear_sky_irradiance(hour) * float(np.clip(1.0 + rng.normal(0.0, 0.02), 0.0, None))
        samples.append(WeatherSample(irradiance=g, ambient_temp=temp,
                                     cloud_cover=cloud, hour=hour))
    return samples


def sample_weather(rng: np.random.Generator) -> WeatherSample:
    """One independent weather draw with a uniformly random hour."""
    hour = int(rng.integers(0, 24))
    cloud = float(rng.beta(2.0, 3.0))
    temp = float(rng.normal(18.0, 5.0)) + 7.0 * math.sin(math.pi * max(0.0, hour - 5.0) / 16.0)
    g = clear_sky_irradiance(hour) * float(np.clip(1.0 + rng.normal(0.0, 0.02), 0.0, None))
    return WeatherSample(irradiance=g, ambient_temp=temp, cloud_cover=cloud, hour=hour)


def cell_temperature(weather: WeatherSample) -> float:
    absorbed = weather.irradiance * (1.0 - CLOUD_DERATE * weather.cloud_cover)
    return weather.ambient_temp + CELL_TEMP_COEFF * absorbed


def solar_capacity_factor(weather: WeatherSample) -> float:
    """Noise-free production as a fraction of rating, clamped to >= 0."""
    t_cell = cell_temperature(weather)
    cf = (weather.irradiance / G_CLEAR_PEAK) \
        * (1.0 - TEMP_DERATE * (t_cell - 25.0)) \
        * (1.0 - CLOUD_DERATE * weather.cloud_cover)
    return max(0.0, cf)


def actual_solar_power(weather: WeatherSample, p_rated: float,
                       rng: np.random.Generator) -> float:
    """Realized plant output: the formula with multiplicative production noise.

    The noise is proportional to production (5% of rating when producing at
    rating): clouds and inverter effects modulate what is being produced, and
    an idle panel has nothing to fluctuate, so night output is exactly zero.
    Clamped to [0, p_rated]: output cannot go negative and the plant cannot
    exceed its nameplate rating.
    """
    cf = solar_capacity_factor(weather)
    raw = p_rated * cf * (1.0 + float(rng.normal(0.0, ACTUAL_NOISE_FRAC)))
    return min(p_rated, max(0.0, raw))


def forecast_weather(weather: WeatherSample, rng: np.random.Generator) -> WeatherSample:
    """Day-ahead forecast: true weather contaminated with forecast error."""
    cloud = float(np.clip(weather.cloud_cover + rng.normal(0.0, FORECAST_CLOUD_SIGMA),
                          0.0, 1.0))
    temp = weather.ambient_temp + float(rng.normal(0.0, FORECAST_TEMP_SIGMA))
    return WeatherSample(irradiance=weather.irradiance, ambient_temp=temp,
                         cloud_cover=cloud, hour=weather.hour)


def committed_solar_power(forecast: WeatherSample, p_rated: float) -> float:
    """Day-ahead commitment: the noise-free formula on the forecast weather."""
    return p_rated * solar_capacity_factor(forecast)
