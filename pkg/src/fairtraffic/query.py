"""Constraint-based data access, query sensitivity, and density-cell aggregation."""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import date as Date
from enum import Enum
from typing import Mapping, Sequence

from .model import TrafficRecord, _field


class NoFilter(ValueError):
    """A query spec carries no constraint at all."""


class UnsupportedFeature(ValueError):
    """The query feature has no defined sensitivity or aggregation."""


class WrongStage(ValueError):
    """A grid arrived at a pipeline stage it is not tagged for."""


class Feature(str, Enum):
    DENSITY_COUNT = "density_count"
    MEAN_SPEED = "mean_speed"


class Stage(str, Enum):
    RAW = "raw"
    SHUFFLED = "shuffled"
    NOISY = "noisy"


#: Columns a projection may expose. All record fields are post-anonymization;
#: the only identifier available is the opaque anon_id itself.
PERMITTED_COLUMNS = frozenset(
    {
        "anon_id",
        "region_id",
        "latitude",
        "longitude",
        "hour",
        "date",
        "speed_kmh",
        "vehicle_count",
        "weather",
        "temperature_c",
        "day_of_week",
        "is_holiday",
    }
)

#: Default speed bound (Norwegian motorway maximum) for mean-speed sensitivity.
DEFAULT_SPEED_CAP = 130.0

#: Cells below this population are suppressed; it also floors the denominator
#: used for mean-speed sensitivity.
DEFAULT_MIN_CELL_COUNT = 10


@dataclass(frozen=True)
class BoundingBox:
    min_lat: float
    min_lon: float
    max_lat: float
    max_lon: float

    def __post_init__(self) -> None:
        if self.min_lat > self.max_lat or self.min_lon > self.max_lon:
            raise ValueError("bounding box minima must not exceed maxima")

    def contains(self, latitude: float, longitude: float) -> bool:
        # Boundary coordinates are inside.
        return (
            self.min_lat <= latitude <= self.max_lat
            and self.min_lon <= longitude <= self.max_lon
        )


@dataclass(frozen=True)
class QuerySpec:
    """Region/time constraints plus the target feature and output projection."""

    regions: frozenset[str] | None = None
    bbox: BoundingBox | None = None
    date_range: tuple[Date, Date] | None = None
    hour_range: tuple[int, int] | None = None
    feature: Feature = Feature.DENSITY_COUNT
    projection: frozenset[str] | None = None

    def validate(self) -> None:
        if (
            self.regions is None
            and self.bbox is None
            and self.date_range is None
            and self.hour_range is None
        ):
            raise NoFilter("query spec must carry at least one filter")
        if self.regions is not None and not self.regions:
            raise ValueError("region filter must not be an empty set")
        if self.date_range is not None and self.date_range[0] > self.date_range[1]:
            raise ValueError("date_range start must not exceed end")
        if self.hour_range is not None:
            lo, hi = self.hour_range
            if not (0 <= lo <= hi <= 23):
                raise ValueError(f"hour_range must satisfy 0 <= lo <= hi <= 23, got {self.hour_range}")
        if self.projection is not None:
            extra = self.projection - PERMITTED_COLUMNS
            if extra:
                raise ValueError(f"projection includes non-permitted columns: {sorted(extra)}")
        Feature(self.feature)

    def matches(self, record: TrafficRecord) -> bool:
        if self.regions is not None and record.region_id not in self.regions:
            return False
        if self.bbox is not None and not self.bbox.contains(record.latitude, record.longitude):
            return False
        if self.date_range is not None and not (
            self.date_range[0] <= record.date <= self.date_range[1]
        ):
            return False
        if self.hour_range is not None and not (
            self.hour_range[0] <= record.hour <= self.hour_range[1]
        ):
            return False
        return True

    def to_json(self) -> dict:
        return {
            "regions": sorted(self.regions) if self.regions is not None else None,
            "bbox": (
                {
                    "min_lat": self.bbox.min_lat,
                    "min_lon": self.bbox.min_lon,
                    "max_lat": self.bbox.max_lat,
                    "max_lon": self.bbox.max_lon,
                }
                if self.bbox is not None
                else None
            ),
            "date_range": (
                [self.date_range[0].isoformat(), self.date_range[1].isoformat()]
                if self.date_range is not None
                else None
            ),
            "hour_range": list(self.hour_range) if self.hour_range is not None else None,
            "feature": self.feature.value,
            "projection": sorted(self.projection) if self.projection is not None else None,
        }

    @classmethod
    def from_json(cls, payload: Mapping) -> "QuerySpec":
        bbox = None
        if payload.get("bbox") is not None:
            b = payload["bbox"]
            bbox = BoundingBox(
                min_lat=float(b["min_lat"]),
                min_lon=float(b["min_lon"]),
                max_lat=float(b["max_lat"]),
                max_lon=float(b["max_lon"]),
            )
        date_range = None
        if payload.get("date_range") is not None:
            start, end = payload["date_range"]
            date_range = (Date.fromisoformat(start), Date.fromisoformat(end))
        hour_range = None
        if payload.get("hour_range") is not None:
            lo, hi = payload["hour_range"]
            hour_range = (int(lo), int(hi))
        regions = None
        if payload.get("regions") is not None:
            regions = frozenset(str(r) for r in payload["regions"])
        projection = None
        if payload.get("projection") is not None:
            projection = frozenset(str(c) for c in payload["projection"])
        return cls(
            regions=regions,
            bbox=bbox,
            date_range=date_range,
            hour_range=hour_range,
            feature=Feature(payload.get("feature", Feature.DENSITY_COUNT.value)),
            projection=projection,
        )


Row = dict


def execute_query(dataset: Sequence[TrafficRecord], spec: QuerySpec) -> list[Row]:
    """Filter records and project the requested columns, preserving dataset order.

    An empty result is a valid return. Shuffling happens in a later stage, so
    output order always equals input order here.
    """
    spec.validate()
    columns = sorted(spec.projection) if spec.projection is not None else sorted(PERMITTED_COLUMNS)
    rows: list[Row] = []
    for record in dataset:
        if spec.matches(record):
            rows.append({name: getattr(record, name) for name in columns})
    return rows


def sensitivity(
    spec: QuerySpec,
    speed_cap: float = DEFAULT_SPEED_CAP,
    min_cell_count: int = DEFAULT_MIN_CELL_COUNT,
) -> float:
    """Worst-case L1 change of the query answer when one record is added/removed.

    Counting queries move any cell by at most 1. Mean-speed cells are released
    with speeds capped at `speed_cap` and denominators floored at
    `min_cell_count`, bounding the swing by speed_cap / min_cell_count.
    """
    feature = Feature(spec.feature) if not isinstance(spec.feature, Feature) else spec.feature
    if feature == Feature.DENSITY_COUNT:
        return 1.0
    if feature == Feature.MEAN_SPEED:
        if speed_cap <= 0:
            raise ValueError("speed_cap must be positive")
        return speed_cap / max(1, min_cell_count)
    raise UnsupportedFeature(str(spec.feature))


@dataclass(frozen=True)
class DensityCellGrid:
    """Aggregated per-cell values tagged with their pipeline stage."""

    cells: Mapping[tuple, float]
    stage: Stage = Stage.RAW

    def __post_init__(self) -> None:
        if self.stage == Stage.RAW and any(v < 0 for v in self.cells.values()):
            raise ValueError("raw-stage cell values must be non-negative")

    def total(self) -> float:
        return sum(self.cells.values())

    def with_stage(self, stage: Stage) -> "DensityCellGrid":
        return replace(self, stage=Stage(stage))

    def sorted_keys(self) -> list[tuple]:
        return sorted(self.cells.keys(), key=repr)

    def __len__(self) -> int:
        return len(self.cells)


DEFAULT_GRANULARITY = ("region_id", "hour")


def _cell_key(row, granularity: Sequence[str]):
    # Single-field granularities key cells by the bare field value, so
    # grouping by the derived "location" yields coordinate-pair keys.
    if len(granularity) == 1:
        return _field(row, granularity[0])
    return tuple(_field(row, name) for name in granularity)


def aggregate_density(
    result: Sequence,
    granularity: Sequence[str] = DEFAULT_GRANULARITY,
    stage: Stage = Stage.RAW,
) -> DensityCellGrid:
    """Sum vehicle counts into cells keyed by the granularity fields.

    Conservation holds by construction: the grid total equals the summed
    vehicle_count of the input rows. The derived field name "location" keys
    cells by the two-decimal coordinate pair.
    """
    cells: dict[tuple, float] = {}
    for row in result:
        count = _field(row, "vehicle_count")
        if count < 0:
            raise ValueError("vehicle_count must be non-negative")
        key = _cell_key(row, granularity)
        cells[key] = cells.get(key, 0) + int(count)
    return DensityCellGrid(cells=cells, stage=Stage(stage))


def aggregate_mean_speed(
    result: Sequence,
    granularity: Sequence[str] = DEFAULT_GRANULARITY,
    speed_cap: float = DEFAULT_SPEED_CAP,
    min_cell_count: int = DEFAULT_MIN_CELL_COUNT,
    stage: Stage = Stage.RAW,
) -> DensityCellGrid:
    """Per-cell capped mean speed with small cells suppressed.

    Speeds are clipped to `speed_cap` and the denominator floored at
    `min_cell_count`, matching the sensitivity bound used for noise
    calibration. Cells with fewer than `min_cell_count` records are dropped.
    """
    sums: dict[tuple, float] = {}
    counts: dict[tuple, int] = {}
    for row in result:
        key = _cell_key(row, granularity)
        speed = min(float(_field(row, "speed_kmh")), speed_cap)
        sums[key] = sums.get(key, 0.0) + speed
        counts[key] = counts.get(key, 0) + 1
    cells = {
        key: sums[key] / max(counts[key], min_cell_count)
        for key in sums
        if counts[key] >= min_cell_count
    }
    return DensityCellGrid(cells=cells, stage=Stage(stage))
