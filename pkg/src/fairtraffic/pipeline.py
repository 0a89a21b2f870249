"""End-to-end composition: query -> fair shuffle -> aggregate -> noise -> exports.

The pipeline enforces stage discipline through the grid stage tag: aggregation
of shuffled rows yields a shuffled-stage grid, and only shuffled grids accept
noise. Raw values exist solely between query and noise inside one call; every
exported artifact carries post-noise values only.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import date as Date
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dp import LaplaceParams, inject_noise
from .metrics import normalize_heatmap, predict_24h, predict_24h_from_noisy
from .model import GroupPartition, TrafficRecord, partition_groups, round_half_up
from .query import (
    DensityCellGrid,
    Feature,
    QuerySpec,
    Stage,
    aggregate_density,
    aggregate_mean_speed,
    execute_query,
    sensitivity,
)
from .shuffler import ShuffleConfig, ShuffleTrace, iterative_shuffle


class InvalidHour(ValueError):
    """Heatmap hour outside 0..23."""


#: Columns each feature's aggregation actually consumes; run_pipeline widens a
#: narrower projection to these so the stages downstream stay functional.
_REQUIRED_FOR_FEATURE = {
    Feature.DENSITY_COUNT: frozenset({"region_id", "hour", "vehicle_count"}),
    Feature.MEAN_SPEED: frozenset({"region_id", "hour", "speed_kmh"}),
}


@dataclass(frozen=True)
class PipelineRunConfig:
    """One full pipeline run: either a fixed epsilon or ledger-driven allocation."""

    dataset_path: Path | None = None
    shuffle_iterations: int = 3
    epsilon: float | None = 2.0
    ledger_driven: bool = False
    rng_seed: int = 0
    grid_output: Path | None = None
    fairness_output: Path | None = None

    def __post_init__(self) -> None:
        has_override = self.epsilon is not None
        if has_override == self.ledger_driven:
            raise ValueError(
                "exactly one of epsilon override and ledger-driven allocation must be active"
            )
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValueError("epsilon override must be positive")
        if self.shuffle_iterations < 1:
            raise ValueError("shuffle_iterations must be >= 1")


@dataclass(frozen=True)
class PipelineResult:
    rows: tuple
    partition: GroupPartition
    shuffled_sequence: tuple[int, ...]
    trace: ShuffleTrace
    raw_grid: DensityCellGrid
    shuffled_grid: DensityCellGrid
    noisy_grid: DensityCellGrid
    params: LaplaceParams


def run_pipeline(
    records: Sequence[TrafficRecord],
    spec: QuerySpec,
    epsilon: float,
    shuffle_iterations: int = 3,
    rng_seed: int = 0,
    group_key: str = "region_id",
) -> PipelineResult:
    """Execute query, shuffle the result fairly, aggregate, and inject noise."""
    needed = _REQUIRED_FOR_FEATURE[Feature(spec.feature)]
    if spec.projection is not None and not needed <= spec.projection:
        spec = replace(spec, projection=spec.projection | needed)
    rows = execute_query(records, spec)
    if not rows:
        empty = DensityCellGrid(cells={}, stage=Stage.RAW)
        params = LaplaceParams.from_budget(epsilon, sensitivity(spec))
        return PipelineResult(
            rows=(),
            partition=GroupPartition(groups={}, total=0),
            shuffled_sequence=(),
            trace=ShuffleTrace(permutations=[], block_variance_series=[], block_size=0),
            raw_grid=empty,
            shuffled_grid=empty.with_stage(Stage.SHUFFLED),
            noisy_grid=empty.with_stage(Stage.NOISY),
            params=params,
        )
    partition = partition_groups(rows, key=group_key)
    sequence, trace = iterative_shuffle(
        partition, ShuffleConfig(iterations=shuffle_iterations, rng_seed=rng_seed)
    )
    shuffled_rows = [rows[i] for i in sequence]
    feature = Feature(spec.feature)
    if feature == Feature.MEAN_SPEED:
        raw_grid = aggregate_mean_speed(rows)
        shuffled_grid = aggregate_mean_speed(shuffled_rows, stage=Stage.SHUFFLED)
    else:
        raw_grid = aggregate_density(rows)
        shuffled_grid = aggregate_density(shuffled_rows, stage=Stage.SHUFFLED)
    params = LaplaceParams.from_budget(epsilon, sensitivity(spec))
    noise_rng = np.random.default_rng(np.random.SeedSequence([rng_seed, 2**31]))
    noisy_grid = inject_noise(shuffled_grid, params, noise_rng)
    return PipelineResult(
        rows=tuple(rows),
        partition=partition,
        shuffled_sequence=tuple(sequence),
        trace=trace,
        raw_grid=raw_grid,
        shuffled_grid=shuffled_grid,
        noisy_grid=noisy_grid,
        params=params,
    )


def displayed_count(value: float) -> int:
    """Clamp-at-zero integer rendering used on every display surface."""
    return max(0, round_half_up(value))


@dataclass(frozen=True)
class HeatmapEntry:
    region_id: str
    latitude: float
    longitude: float
    intensity: float
    noisy_count: int

    def to_json(self) -> dict:
        return {
            "region_id": self.region_id,
            "latitude": self.latitude,
            "longitude": self.longitude,
            "intensity": self.intensity,
            "noisy_count": self.noisy_count,
        }


@dataclass(frozen=True)
class HeatmapExport:
    """Per-region intensities for one hour, on a scale shared across all hours.

    Intensities are normalized against the maximum of the full 24-hour noisy
    grid, so exports for different hours are directly comparable. noisy_count
    is the clamped display value; raw counts never appear here.
    """

    hour: int
    epsilon: float
    entries: tuple[HeatmapEntry, ...] = field(default_factory=tuple)
    metadata: Mapping[str, object] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "hour": self.hour,
            "epsilon": self.epsilon,
            "entries": [entry.to_json() for entry in self.entries],
            "metadata": dict(self.metadata),
        }


def region_coordinates(records: Sequence[TrafficRecord]) -> dict[str, tuple[float, float]]:
    """Mean per-region coordinates at display precision."""
    sums: dict[str, list[float]] = {}
    for r in records:
        acc = sums.setdefault(r.region_id, [0.0, 0.0, 0.0])
        acc[0] += r.latitude
        acc[1] += r.longitude
        acc[2] += 1.0
    return {
        region: (round(lat / n, 2), round(lon / n, 2))
        for region, (lat, lon, n) in sums.items()
    }


def noisy_hourly_release(
    records: Sequence[TrafficRecord],
    epsilon: float,
    shuffle_iterations: int = 3,
    rng_seed: int = 0,
) -> DensityCellGrid:
    """One noisy (region, hour) release over the whole dataset."""
    spec = QuerySpec(
        hour_range=(0, 23),
        projection=frozenset({"region_id", "hour", "vehicle_count"}),
    )
    result = run_pipeline(
        records,
        spec,
        epsilon=epsilon,
        shuffle_iterations=shuffle_iterations,
        rng_seed=rng_seed,
    )
    return result.noisy_grid


def export_heatmap(
    records: Sequence[TrafficRecord],
    hour: int,
    epsilon: float,
    shuffle_iterations: int = 3,
    rng_seed: int = 0,
    noisy_grid: DensityCellGrid | None = None,
) -> HeatmapExport:
    """Build the per-region heatmap for one hour from a noisy full-day release.

    Passing `noisy_grid` reuses an existing release (one privacy charge,
    many views); otherwise a fresh release is generated from the records.
    """
    if not (0 <= hour <= 23):
        raise InvalidHour(f"hour must be in [0, 23], got {hour}")
    if not records:
        return HeatmapExport(hour=hour, epsilon=epsilon, entries=(), metadata={"seed": rng_seed})
    if noisy_grid is None:
        noisy_grid = noisy_hourly_release(
            records, epsilon=epsilon, shuffle_iterations=shuffle_iterations, rng_seed=rng_seed
        )
    intensities = normalize_heatmap(noisy_grid)
    coordinates = region_coordinates(records)
    entries = []
    for (region, cell_hour), value in sorted(noisy_grid.cells.items(), key=lambda kv: repr(kv[0])):
        if cell_hour != hour:
            continue
        lat, lon = coordinates[region]
        entries.append(
            HeatmapEntry(
                region_id=region,
                latitude=lat,
                longitude=lon,
                intensity=intensities[(region, cell_hour)],
                noisy_count=displayed_count(value),
            )
        )
    return HeatmapExport(
        hour=hour,
        epsilon=epsilon,
        entries=tuple(entries),
        metadata={"seed": rng_seed, "regions": len(entries)},
    )


def noisy_history_release(
    records: Sequence[TrafficRecord],
    region: str,
    epsilon: float,
    shuffle_iterations: int = 3,
    rng_seed: int = 0,
) -> dict[tuple[Date, int], float]:
    """Noisy per-(date, hour) history for a region, for prediction use.

    The region's records are shuffled fairly, aggregated per (date, hour),
    and noised at the given epsilon. Returns unclamped noisy values.
    """
    region_records = [r for r in records if r.region_id == region]
    if not region_records:
        return {}
    partition = partition_groups(region_records, key="region_id")
    sequence, _ = iterative_shuffle(
        partition, ShuffleConfig(iterations=shuffle_iterations, rng_seed=rng_seed)
    )
    shuffled = [region_records[i] for i in sequence]
    grid = aggregate_density(shuffled, granularity=("date", "hour"), stage=Stage.SHUFFLED)
    params = LaplaceParams.from_budget(epsilon, 1.0)
    rng = np.random.default_rng(np.random.SeedSequence([rng_seed, 2**31 + 1]))
    noisy = inject_noise(grid, params, rng)
    return dict(noisy.cells)


def prediction_pair(
    records: Sequence[TrafficRecord],
    region: str,
    forecast,
    epsilon: float,
    shuffle_iterations: int = 3,
    rng_seed: int = 0,
) -> tuple[list[int], list[int]]:
    """24-hour predictions from the original history and from a noisy release."""
    original = predict_24h(records, region, forecast)
    noisy_history = noisy_history_release(
        records,
        region,
        epsilon=epsilon,
        shuffle_iterations=shuffle_iterations,
        rng_seed=rng_seed,
    )
    noisy = predict_24h_from_noisy(noisy_history, forecast)
    return original, noisy
