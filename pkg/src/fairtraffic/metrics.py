"""Utility error metrics, fairness statistics, heatmap scaling, and 24h prediction."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date as Date, timedelta
from typing import Iterable, Mapping, Sequence

import numpy as np

from .model import DayOfWeek, GroupPartition, TrafficRecord, Weather, round_half_up
from .generator import weather_adjust
from .query import DensityCellGrid


class KeyMismatch(ValueError):
    """The two grids do not cover the same cells."""


class InsufficientTrials(ValueError):
    """Too few noisy trials for a stable variance estimate."""


class InsufficientHistory(ValueError):
    """Prediction needs more history days for the region."""


MIN_FAIRNESS_TRIALS = 30

#: Per-group variance ratios outside this band raise the unfairness flag.
FAIRNESS_RATIO_BAND = (0.8, 1.25)

MIN_PREDICTION_DAYS = 7


def _cells(grid: "DensityCellGrid | Mapping[tuple, float]") -> Mapping[tuple, float]:
    return grid.cells if isinstance(grid, DensityCellGrid) else grid


def _paired_values(original, noisy) -> tuple[np.ndarray, np.ndarray]:
    a = _cells(original)
    b = _cells(noisy)
    if set(a.keys()) != set(b.keys()):
        raise KeyMismatch("grids must cover identical cell keys")
    keys = sorted(a.keys(), key=repr)
    return (
        np.array([a[k] for k in keys], dtype=float),
        np.array([b[k] for k in keys], dtype=float),
    )


def mse(original, noisy) -> float:
    """Mean squared per-cell difference."""
    a, b = _paired_values(original, noisy)
    if len(a) == 0:
        return 0.0
    return float(np.mean((a - b) ** 2))


def mae(original, noisy) -> float:
    """Mean absolute per-cell difference."""
    a, b = _paired_values(original, noisy)
    if len(a) == 0:
        return 0.0
    return float(np.mean(np.abs(a - b)))


@dataclass(frozen=True)
class UtilityReport:
    mse: float
    mae: float
    utility: float
    epsilon: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.utility <= 1.0):
            raise ValueError(f"utility must lie in [0, 1], got {self.utility}")

    def to_json(self) -> dict:
        return {
            "mse": self.mse,
            "mae": self.mae,
            "utility": self.utility,
            "epsilon": self.epsilon,
        }


def utility_report(mse_value: float, mae_value: float, mse_ref: float, epsilon: float) -> UtilityReport:
    """Normalize error into a [0, 1] utility against the worst observed MSE."""
    utility = 1.0 - (mse_value / mse_ref) if mse_ref > 0 else 1.0
    return UtilityReport(
        mse=mse_value,
        mae=mae_value,
        utility=min(1.0, max(0.0, utility)),
        epsilon=epsilon,
    )


@dataclass(frozen=True)
class FairnessReport:
    """Group-level proportion preservation and noise-burden equality."""

    pre_proportions: Mapping[object, float]
    post_proportions: Mapping[object, float]
    max_proportion_deviation: float
    noise_variances: Mapping[object, float]
    variance_ratios: Mapping[object, float]
    variance_ratio_spread: float
    flagged_groups: tuple
    unfair: bool

    def to_json(self) -> dict:
        def keyed(mapping: Mapping) -> dict:
            return {str(k): v for k, v in mapping.items()}

        return {
            "pre_proportions": keyed(self.pre_proportions),
            "post_proportions": keyed(self.post_proportions),
            "max_proportion_deviation": self.max_proportion_deviation,
            "noise_variances": keyed(self.noise_variances),
            "variance_ratios": keyed(self.variance_ratios),
            "variance_ratio_spread": self.variance_ratio_spread,
            "flagged_groups": [str(g) for g in self.flagged_groups],
            "unfair": self.unfair,
        }


def fairness_report(
    partition: GroupPartition,
    shuffled_sequence: Sequence[int],
    original_grid: DensityCellGrid,
    noisy_trials: Iterable[DensityCellGrid],
    ratio_band: tuple[float, float] = FAIRNESS_RATIO_BAND,
    min_trials: int = MIN_FAIRNESS_TRIALS,
) -> FairnessReport:
    """Check proportion preservation and per-group noise variance equality.

    Post-shuffle proportions are recomputed from the shuffled sequence and
    compared against the partition's; any true permutation gives deviation 0.
    Noise variance per group pools the (noisy - original) residuals of the
    group's cells across all trials; each group's ratio to the mean variance
    must stay inside `ratio_band`, otherwise the report is flagged unfair.
    A cell belongs to the group named by its first key component.
    """
    membership = partition.membership()
    post_counts: dict[object, int] = {key: 0 for key in partition.groups}
    for index in shuffled_sequence:
        post_counts[membership[int(index)]] += 1
    if sum(post_counts.values()) != partition.total:
        raise ValueError("shuffled sequence must cover the partitioned dataset")
    post = {key: count / partition.total for key, count in post_counts.items()}
    max_dev = max(
        abs(post[key] - partition.proportions[key]) for key in partition.groups
    )

    keys = original_grid.sorted_keys()
    baseline = np.array([original_grid.cells[k] for k in keys], dtype=float)
    group_of_cell = [key[0] for key in keys]
    group_names = sorted(set(group_of_cell), key=repr)
    codes = np.array([group_names.index(g) for g in group_of_cell], dtype=np.int64)

    sums = np.zeros(len(group_names))
    sq_sums = np.zeros(len(group_names))
    counts = np.zeros(len(group_names))
    trials = 0
    for noisy in noisy_trials:
        values = np.array([_cells(noisy)[k] for k in keys], dtype=float)
        residual = values - baseline
        np.add.at(sums, codes, residual)
        np.add.at(sq_sums, codes, residual**2)
        np.add.at(counts, codes, 1.0)
        trials += 1
    if trials < min_trials:
        raise InsufficientTrials(f"need at least {min_trials} noisy trials, got {trials}")

    means = sums / counts
    variances = sq_sums / counts - means**2
    mean_variance = float(np.mean(variances))
    ratios = variances / mean_variance if mean_variance > 0 else np.ones_like(variances)

    lo, hi = ratio_band
    flagged = tuple(
        name for name, ratio in zip(group_names, ratios) if not (lo <= ratio <= hi)
    )
    spread = float(np.max(ratios) / np.min(ratios)) if np.min(ratios) > 0 else float("inf")

    return FairnessReport(
        pre_proportions=dict(partition.proportions),
        post_proportions=post,
        max_proportion_deviation=max_dev,
        noise_variances={name: float(v) for name, v in zip(group_names, variances)},
        variance_ratios={name: float(r) for name, r in zip(group_names, ratios)},
        variance_ratio_spread=spread,
        flagged_groups=flagged,
        unfair=bool(flagged),
    )


def normalize_heatmap(grid: "DensityCellGrid | Mapping[tuple, float]") -> dict[tuple, float]:
    """Scale cell values into [0, 1] intensities against the grid maximum.

    Negative (noisy) values clamp to 0; an all-zero (or all-negative) grid maps
    to all zeros.
    """
    cells = _cells(grid)
    if not cells:
        return {}
    maximum = max(cells.values())
    if maximum <= 0:
        return {key: 0.0 for key in cells}
    return {key: min(max(value, 0.0), maximum) / maximum for key, value in cells.items()}


def _history_cells(
    history: Sequence[TrafficRecord], region: str
) -> dict[tuple[Date, int], int]:
    cells: dict[tuple[Date, int], int] = {}
    for record in history:
        if record.region_id == region:
            key = (record.date, record.hour)
            cells[key] = cells.get(key, 0) + record.vehicle_count
    return cells


def _predict_from_cells(
    cells: Mapping[tuple[Date, int], float],
    forecast: Sequence[Weather],
    target_date: Date,
) -> list[int]:
    if len(forecast) != 24:
        raise ValueError(f"forecast must cover 24 hours, got {len(forecast)}")
    dates = sorted({key[0] for key in cells})
    if len(dates) < MIN_PREDICTION_DAYS:
        raise InsufficientHistory(
            f"need at least {MIN_PREDICTION_DAYS} history days, got {len(dates)}"
        )
    target_weekend = DayOfWeek.from_date(target_date).is_weekend
    prediction: list[int] = []
    for hour in range(24):
        matching = [
            value
            for (day, h), value in cells.items()
            if h == hour and DayOfWeek.from_date(day).is_weekend == target_weekend
        ]
        if not matching:  # fall back to all days when the class has no sample
            matching = [value for (day, h), value in cells.items() if h == hour]
        base = max(0.0, float(np.mean(matching))) if matching else 0.0
        prediction.append(weather_adjust(round_half_up(base), Weather(forecast[hour])))
    return prediction


def predict_24h(
    history: Sequence[TrafficRecord],
    region: str,
    forecast: Sequence[Weather],
    target_date: Date | None = None,
) -> list[int]:
    """Forecast the next 24 hourly counts for a region.

    Takes the historical per-hour mean within the target day's
    weekday/weekend class, then applies the per-hour weather adjustment.
    Deterministic given history and forecast.
    """
    cells = _history_cells(history, region)
    if not cells:
        raise InsufficientHistory(f"no history for region {region!r}")
    if target_date is None:
        target_date = max(key[0] for key in cells) + timedelta(days=1)
    return _predict_from_cells(cells, forecast, target_date)


def predict_24h_from_noisy(
    noisy_history: Mapping[tuple[Date, int], float],
    forecast: Sequence[Weather],
    target_date: Date | None = None,
) -> list[int]:
    """Same estimator, run over a noise-injected (date, hour) history release."""
    if not noisy_history:
        raise InsufficientHistory("empty noisy history")
    if target_date is None:
        target_date = max(key[0] for key in noisy_history) + timedelta(days=1)
    return _predict_from_cells(noisy_history, forecast, target_date)
