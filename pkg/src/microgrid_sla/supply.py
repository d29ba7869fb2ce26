"""Renewable supply: clear-sky sinusoid or measured normalized intensity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

from .errors import ScenarioError
from .timeseries import TimeSeries

DAY = 86400


@dataclass(frozen=True)
class PvParams:
    peak_power: float = 3300.0
    efficiency: float = 1.0

    def __post_init__(self):
        if not self.peak_power > 0:
            raise ScenarioError("pv.peak_power", f"must be > 0, got {self.peak_power}")
        if not 0 < self.efficiency <= 1:
            raise ScenarioError("pv.efficiency", f"must be in (0, 1], got {self.efficiency}")

    @property
    def max_output(self) -> float:
        return self.peak_power * self.efficiency


@dataclass(frozen=True)
class ClearSky:
    """Ideal sunlight: a half sine between sunrise and sunset, every day.

    ``amplitude`` scales the noon peak (1.0 = full peak power); winter
    scenarios use it to model the lower sun.
    """

    day_length: int = 8 * 3600
    sunrise: int = 8 * 3600
    amplitude: float = 1.0

    def __post_init__(self):
        if self.day_length <= 0:
            raise ScenarioError("weather.day_length", "must be > 0")
        if not 0 <= self.sunrise < DAY:
            raise ScenarioError("weather.sunrise", "must be a second of the day")
        if self.sunrise + self.day_length > DAY:
            raise ScenarioError("weather", "sunset falls after midnight")
        if not 0 <= self.amplitude <= 1:
            raise ScenarioError("weather.amplitude", "must be in [0, 1]")

    @property
    def solar_noon(self) -> float:
        return self.sunrise + self.day_length / 2


@dataclass(frozen=True)
class Measured:
    """Normalized intensity samples, clamped to [0, 1] on read."""

    series: TimeSeries
    path: str | None = field(default=None, compare=False)


WeatherSource = Union[ClearSky, Measured]

WINTER = ClearSky(day_length=8 * 3600, sunrise=8 * 3600)
SUMMER = ClearSky(day_length=16 * 3600, sunrise=5 * 3600)


def clearsky_intensity(t: float, t_max: float) -> float:
    if t < 0 or t > t_max:
        return 0.0
    return math.sin(math.pi * t / t_max)


def pv_power(intensity: float, pv: PvParams) -> float:
    return intensity * pv.peak_power * pv.efficiency


def intensity_at(source: WeatherSource, t: int) -> float:
    if isinstance(source, ClearSky):
        return source.amplitude * clearsky_intensity(t % DAY - source.sunrise, source.day_length)
    v = source.series.hold(t, 0.0)
    return min(1.0, max(0.0, v))


def supply_at(source: WeatherSource, pv: PvParams, t: int) -> float:
    """Renewable power in watts at epoch second ``t``."""
    return pv_power(intensity_at(source, t), pv)
