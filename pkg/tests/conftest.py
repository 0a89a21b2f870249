"""Shared fixtures: small deterministic datasets and the reference comparison rows."""

from __future__ import annotations

from datetime import date as Date

import pytest

from fairtraffic.generator import default_config, generate_dataset
from fairtraffic.model import DayOfWeek, TrafficRecord, Weather


def make_record(**overrides) -> TrafficRecord:
    base = dict(
        anon_id="a" * 64,
        region_id="Oslo",
        latitude=59.91,
        longitude=10.75,
        hour=8,
        date=Date(2024, 1, 2),
        speed_kmh=60.0,
        vehicle_count=5,
        weather=Weather.CLEAR,
        temperature_c=5.0,
        day_of_week=DayOfWeek.TUE,
        is_holiday=False,
    )
    base.update(overrides)
    return TrafficRecord(**base)


#: The published five-row comparison sample: (anon_id, lat, lon, speed, count).
TABLE_ROWS = (
    ("A1B2C3", 59.91, 10.75, 60.0, 5),
    ("D4E5F6", 59.92, 10.76, 55.0, 3),
    ("G7H8I9", 59.91, 10.75, 50.0, 4),
    ("J1K2L3", 59.90, 10.74, 65.0, 2),
    ("N4N5O1", 59.92, 10.76, 60.0, 6),
)


@pytest.fixture()
def table_records() -> list[TrafficRecord]:
    return [
        make_record(anon_id=a, latitude=lat, longitude=lon, speed_kmh=s, vehicle_count=c)
        for a, lat, lon, s, c in TABLE_ROWS
    ]


@pytest.fixture(scope="session")
def small_dataset():
    return generate_dataset(default_config(cities=10, days=10, rng_seed=11))
