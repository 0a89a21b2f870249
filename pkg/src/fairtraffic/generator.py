"""Seeded synthetic traffic dataset: hourly densities for Norwegian cities.

The simulation layers a deterministic expectation (population weight, rush-hour
profile, weekend/holiday factors) with per-condition weather adjustments,
occasional rain accidents, and bounded multiplicative jitter. Every stochastic
choice is drawn from a substream derived from (seed, city, day), so generation
is reproducible and order-independent.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field as dataclass_field
from datetime import date as Date, timedelta
from typing import Mapping

import numpy as np

from .cities import NORWAY_CITIES, City
from .model import (
    DayOfWeek,
    RawPii,
    TrafficRecord,
    Weather,
    anonymize_pii,
    round_half_up,
)


class InvalidConfig(ValueError):
    """Generator configuration violates an invariant."""


class UnknownCity(KeyError):
    """A region_id not present in the configured city list."""


@dataclass(frozen=True)
class WeatherEffect:
    """How one weather condition perturbs an hourly vehicle count."""

    condition: Weather
    multiplier: float
    additive_vehicles_per_hour: int


#: Rain and fog slow traffic and raise density 10%; snow raises it 20%;
#: clear weather adds a flat 20 vehicles/hour of extra travel activity.
WEATHER_EFFECTS: Mapping[Weather, WeatherEffect] = {
    Weather.CLEAR: WeatherEffect(Weather.CLEAR, 1.0, 20),
    Weather.RAIN: WeatherEffect(Weather.RAIN, 1.10, 0),
    Weather.FOG: WeatherEffect(Weather.FOG, 1.10, 0),
    Weather.SNOW: WeatherEffect(Weather.SNOW, 1.20, 0),
}

#: Expected off-peak vehicles per hour per unit of population weight.
BASE_HOURLY_PER_WEIGHT = 40.0

#: Morning rush reaches this fraction of the evening rush lift above baseline.
MORNING_PEAK_SCALE = 0.6

#: Fixed-date Norwegian public holidays (month, day).
FIXED_HOLIDAYS = frozenset({(1, 1), (5, 1), (5, 17), (12, 25), (12, 26)})

DEFAULT_WEATHER_PROBABILITIES: Mapping[Weather, float] = {
    Weather.CLEAR: 0.55,
    Weather.RAIN: 0.20,
    Weather.FOG: 0.10,
    Weather.SNOW: 0.15,
}

#: Rain accident surcharge: per-hour event probability and vehicle bounds.
ACCIDENT_PROBABILITY_DEFAULT = 0.05
ACCIDENT_EXTRA_MIN = 20
ACCIDENT_EXTRA_MAX = 100


@dataclass(frozen=True)
class GeneratorConfig:
    cities: tuple[City, ...] = NORWAY_CITIES
    days: int = 30
    rng_seed: int = 42
    base_peak_multiplier: float = 2.6
    weekend_saturday_multiplier: float = 0.8
    weekend_sunday_multiplier: float = 0.6
    start_date: Date = Date(2024, 1, 1)
    weather_probabilities: Mapping[Weather, float] = dataclass_field(
        default_factory=lambda: dict(DEFAULT_WEATHER_PROBABILITIES)
    )
    accident_probability: float = ACCIDENT_PROBABILITY_DEFAULT
    jitter_low: float = 0.9
    jitter_high: float = 1.1

    def __post_init__(self) -> None:
        if not (1 <= len(self.cities) <= 1000):
            raise InvalidConfig(f"need 1..1000 cities, got {len(self.cities)}")
        if any(c.population_weight <= 0 for c in self.cities):
            raise InvalidConfig("population weights must be positive")
        if len({c.region_id for c in self.cities}) != len(self.cities):
            raise InvalidConfig("city region_ids must be unique")
        if self.days < 1:
            raise InvalidConfig(f"days must be >= 1, got {self.days}")
        if self.rng_seed < 0:
            raise InvalidConfig("rng_seed must be non-negative")
        if self.base_peak_multiplier <= 1.0:
            raise InvalidConfig("base_peak_multiplier must exceed 1")
        if not (0.0 < self.weekend_sunday_multiplier < self.weekend_saturday_multiplier < 1.0):
            raise InvalidConfig(
                "weekend multipliers must satisfy 0 < sunday < saturday < 1 "
                "(Sundays quietest, Saturdays between Sunday and weekdays)"
            )
        probs = self.weather_probabilities
        if set(probs) != set(Weather) or any(p < 0 for p in probs.values()):
            raise InvalidConfig("weather_probabilities must cover all four conditions")
        if abs(sum(probs.values()) - 1.0) > 1e-9:
            raise InvalidConfig("weather probabilities must sum to 1")
        if not (0.0 <= self.accident_probability <= 1.0):
            raise InvalidConfig("accident_probability must be in [0, 1]")
        if not (0.0 < self.jitter_low <= self.jitter_high):
            raise InvalidConfig("jitter bounds must satisfy 0 < low <= high")
        object.__setattr__(self, "_city_index", {c.region_id: c for c in self.cities})

    def city(self, region_id: str) -> City:
        try:
            return self._city_index[region_id]  # type: ignore[attr-defined]
        except KeyError:
            raise UnknownCity(region_id) from None

    @property
    def pii_salt(self) -> bytes:
        return hashlib.sha256(f"fairtraffic-pii-salt-{self.rng_seed}".encode()).digest()


def default_config(cities: int = 50, days: int = 30, rng_seed: int = 42) -> GeneratorConfig:
    """The paper-scale configuration, optionally truncated to fewer cities."""
    return GeneratorConfig(cities=NORWAY_CITIES[:cities], days=days, rng_seed=rng_seed)


def weather_adjust(base_count: int, condition: Weather) -> int:
    """Apply the per-condition density adjustment to an hourly count.

    Rain/fog scale by 1.10, snow by 1.20 (rounded half-up), clear adds a flat
    20 vehicles. Result never drops below zero.
    """
    if base_count < 0:
        raise ValueError(f"base_count must be non-negative, got {base_count}")
    effect = WEATHER_EFFECTS[Weather(condition)]
    adjusted = round_half_up(base_count * effect.multiplier) + effect.additive_vehicles_per_hour
    return max(0, adjusted)


def _hour_profile(hour: int, peak_multiplier: float) -> float:
    morning_peak = 1.0 + MORNING_PEAK_SCALE * (peak_multiplier - 1.0)
    if hour in (6, 7):
        return morning_peak
    if hour == 5:
        # The rush starts at 05:30, so the 5 o'clock bucket gets half the lift.
        return 1.0 + (morning_peak - 1.0) / 2.0
    if hour in (16, 17):
        return peak_multiplier
    return 1.0


def base_density(
    city: str,
    hour: int,
    day: DayOfWeek,
    is_holiday: bool,
    config: GeneratorConfig,
) -> float:
    """Deterministic expected vehicle count before weather and jitter.

    Weekday rush windows (05:30-08:00 and 16:00-18:00) lift the flat baseline;
    Sundays and holidays carry the lowest factor, Saturdays sit between Sunday
    and weekday levels. Scales linearly with the city's population weight.
    """
    if not (0 <= hour <= 23):
        raise ValueError(f"hour must be in [0, 23], got {hour}")
    entry = config.city(city)
    day = DayOfWeek(day)
    if is_holiday or day == DayOfWeek.SUN:
        day_factor = config.weekend_sunday_multiplier
        profile = 1.0
    elif day == DayOfWeek.SAT:
        day_factor = config.weekend_saturday_multiplier
        profile = 1.0
    else:
        day_factor = 1.0
        profile = _hour_profile(hour, config.base_peak_multiplier)
    return entry.population_weight * BASE_HOURLY_PER_WEIGHT * profile * day_factor


def _cell_rng(config: GeneratorConfig, city_index: int, day_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([config.rng_seed, city_index, day_index])
    )


_WEATHER_ORDER = (Weather.CLEAR, Weather.RAIN, Weather.FOG, Weather.SNOW)

_PLATE_LETTERS = "ABCDEFGHJKLNPRSTUVXYZ"


def generate_dataset(config: GeneratorConfig) -> list[TrafficRecord]:
    """Generate |cities| x days x 24 records, byte-identical for equal configs."""
    if not isinstance(config, GeneratorConfig):
        raise InvalidConfig("config must be a GeneratorConfig")
    probs = np.array([config.weather_probabilities[w] for w in _WEATHER_ORDER], dtype=float)
    probs = probs / probs.sum()
    salt = config.pii_salt
    records: list[TrafficRecord] = []
    for city_index, city in enumerate(config.cities):
        # Speed degrades with load relative to the city's own rush-hour scale.
        capacity = city.population_weight * BASE_HOURLY_PER_WEIGHT * config.base_peak_multiplier
        for day_index in range(config.days):
            rng = _cell_rng(config, city_index, day_index)
            day = config.start_date + timedelta(days=day_index)
            date_text = day.isoformat()
            dow = DayOfWeek.from_date(day)
            holiday = (day.month, day.day) in FIXED_HOLIDAYS
            condition = _WEATHER_ORDER[int(rng.choice(len(_WEATHER_ORDER), p=probs))]
            day_temp = float(rng.uniform(-2.0, 22.0))
            jitters = rng.uniform(config.jitter_low, config.jitter_high, 24)
            accident_hits = rng.random(24) < config.accident_probability
            accident_extras = rng.integers(ACCIDENT_EXTRA_MIN, ACCIDENT_EXTRA_MAX + 1, 24)
            speed_noise = rng.uniform(-5.0, 5.0, 24)
            plate_letters = rng.integers(0, len(_PLATE_LETTERS), (24, 2))
            plate_digits = rng.integers(10000, 100000, 24)
            vins = rng.integers(10**9, 10**10, 24)
            for hour in range(24):
                expectation = weather_adjust(
                    round_half_up(base_density(city.region_id, hour, dow, holiday, config)),
                    condition,
                )
                count = max(0, round_half_up(expectation * float(jitters[hour])))
                if condition == Weather.RAIN and accident_hits[hour]:
                    count += int(accident_extras[hour])
                temperature = min(
                    25.0,
                    max(-5.0, day_temp + 3.0 * math.sin(2.0 * math.pi * (hour - 14) / 24.0)),
                )
                speed = 80.0 - 55.0 * min(1.0, count / capacity) + float(speed_noise[hour])
                speed = min(110.0, max(15.0, speed))
                pii = RawPii(
                    license_plate=(
                        _PLATE_LETTERS[plate_letters[hour, 0]]
                        + _PLATE_LETTERS[plate_letters[hour, 1]]
                        + str(int(plate_digits[hour]))
                    ),
                    vehicle_identifier=f"VIN{int(vins[hour])}",
                    timestamp=f"{date_text}T{hour:02d}:00:00",
                    driver_attributes=(("home_region", city.region_id),),
                )
                records.append(
                    TrafficRecord(
                        anon_id=anonymize_pii(pii, salt),
                        region_id=city.region_id,
                        latitude=city.latitude,
                        longitude=city.longitude,
                        hour=hour,
                        date=day,
                        speed_kmh=round(speed, 1),
                        vehicle_count=count,
                        weather=condition,
                        temperature_c=round(temperature, 1),
                        day_of_week=dow,
                        is_holiday=holiday,
                    )
                )
    return records
