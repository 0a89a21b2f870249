"""Laplace mechanism, decaying privacy-budget ledger, and the epsilon optimizer.

Noise is drawn by inverting the Laplace CDF on uniform variates. Laplace(0, b)
has mean 0 and variance 2*b^2; both moments are independent of which group a
cell belongs to, which is what keeps the noise burden uniform across regions.
"""

from __future__ import annotations

import json
import math
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .model import partition_groups
from .query import (
    DensityCellGrid,
    QuerySpec,
    Stage,
    WrongStage,
    aggregate_density,
    execute_query,
    sensitivity,
)
from .shuffler import ShuffleConfig, iterative_shuffle


class NonPositiveScale(ValueError):
    """Laplace scale must be strictly positive."""


class BudgetExhausted(RuntimeError):
    """The ledger cannot fund another query; the caller must refuse, not degrade."""


class EmptyGrid(ValueError):
    """The epsilon candidate grid is empty."""


def laplace_inverse_cdf(u: float, b: float) -> float:
    """Quantile of Laplace(0, b) at u in (0, 1): -b * sign(u - 1/2) * ln(1 - 2|u - 1/2|)."""
    if b <= 0:
        raise NonPositiveScale(f"scale must be positive, got {b}")
    if not (0.0 < u < 1.0):
        raise ValueError(f"u must lie strictly inside (0, 1), got {u}")
    centered = u - 0.5
    if centered == 0.0:
        return 0.0
    return -b * math.copysign(1.0, centered) * math.log(1.0 - 2.0 * abs(centered))


def laplace_sample(b: float, rng: np.random.Generator) -> float:
    """One Laplace(0, b) draw via inverse-CDF sampling."""
    if b <= 0:
        raise NonPositiveScale(f"scale must be positive, got {b}")
    u = float(rng.random())
    if u <= 0.0:  # rng.random() is [0, 1); keep the argument inside the open interval
        u = np.finfo(float).tiny
    return laplace_inverse_cdf(u, b)


def laplace_noise_array(b: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """Vectorized inverse-CDF sampling, same distribution as laplace_sample."""
    if b <= 0:
        raise NonPositiveScale(f"scale must be positive, got {b}")
    u = rng.random(size)
    u = np.clip(u, np.finfo(float).tiny, 1.0 - np.finfo(float).epsneg)
    centered = u - 0.5
    return -b * np.sign(centered) * np.log1p(-2.0 * np.abs(centered))


@dataclass(frozen=True)
class LaplaceParams:
    """Noise calibration b = sensitivity / epsilon."""

    epsilon: float
    sensitivity: float
    scale: float

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.sensitivity <= 0:
            raise ValueError(f"sensitivity must be positive, got {self.sensitivity}")
        if self.scale != self.sensitivity / self.epsilon:
            raise ValueError("scale must equal sensitivity / epsilon")

    @classmethod
    def from_budget(cls, epsilon: float, sensitivity: float = 1.0) -> "LaplaceParams":
        if epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        if sensitivity <= 0:
            raise ValueError(f"sensitivity must be positive, got {sensitivity}")
        return cls(epsilon=epsilon, sensitivity=sensitivity, scale=sensitivity / epsilon)


def inject_noise(
    grid: DensityCellGrid,
    params: LaplaceParams,
    rng: np.random.Generator,
    group_scale_overrides: Mapping[object, float] | None = None,
) -> DensityCellGrid:
    """Add independent Laplace noise to every cell of a shuffled grid.

    Cells keep their raw (unclamped) noisy values so unbiasedness stays
    measurable; clamping at zero happens only on display surfaces. The draw
    for a cell depends only on its position in the sorted key order, never on
    group membership. `group_scale_overrides` multiplies the scale for cells
    whose first key component matches; it exists for negative-control
    experiments and is not part of the release path.
    """
    if grid.stage != Stage.SHUFFLED:
        raise WrongStage(
            f"noise can only be injected into a shuffled grid, got stage {grid.stage.value!r}"
        )
    keys = grid.sorted_keys()
    noise = laplace_noise_array(params.scale, rng, len(keys))
    if group_scale_overrides:
        factors = np.array(
            [float(group_scale_overrides.get(key[0], 1.0)) for key in keys], dtype=float
        )
        noise = noise * factors
    cells = {key: grid.cells[key] + float(noise[i]) for i, key in enumerate(keys)}
    return DensityCellGrid(cells=cells, stage=Stage.NOISY)


@dataclass(frozen=True)
class BudgetEntry:
    query_id: str
    epsilon: float
    timestamp: float

    def to_json(self) -> dict:
        return {"query_id": self.query_id, "epsilon": self.epsilon, "timestamp": self.timestamp}


class PrivacyBudgetLedger:
    """Total budget split across queries by a geometric decay on the remainder.

    Each allocation takes decay_ratio of whatever budget remains, so charges
    decrease strictly and their sum never reaches the total. Once the next
    charge would fall below epsilon_min the ledger refuses outright. When a
    path is given, allocations append to a JSON-lines file and are replayed on
    construction, so budget state survives restarts. Allocation is serialized
    under a lock, so concurrent requesters observe a total order.
    """

    def __init__(
        self,
        total_epsilon: float,
        decay_ratio: float = 0.5,
        epsilon_min: float = 0.1,
        path: Path | str | None = None,
    ) -> None:
        if total_epsilon <= 0:
            raise ValueError(f"total_epsilon must be positive, got {total_epsilon}")
        if not (0.0 < decay_ratio < 1.0):
            raise ValueError(f"decay_ratio must lie in (0, 1), got {decay_ratio}")
        if epsilon_min <= 0:
            raise ValueError(f"epsilon_min must be positive, got {epsilon_min}")
        self.total_epsilon = total_epsilon
        self.decay_ratio = decay_ratio
        self.epsilon_min = epsilon_min
        self.path = Path(path) if path is not None else None
        self.spent: list[BudgetEntry] = []
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._replay()

    def _replay(self) -> None:
        assert self.path is not None
        with self.path.open("r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                self.spent.append(
                    BudgetEntry(
                        query_id=str(entry["query_id"]),
                        epsilon=float(entry["epsilon"]),
                        timestamp=float(entry["timestamp"]),
                    )
                )

    @property
    def spent_epsilon(self) -> float:
        return sum(entry.epsilon for entry in self.spent)

    @property
    def remaining_epsilon(self) -> float:
        return self.total_epsilon - self.spent_epsilon

    def allocate(self, query_id: str) -> float:
        """Charge the next geometric epsilon share, or refuse with BudgetExhausted."""
        with self._lock:
            remaining = self.total_epsilon - sum(e.epsilon for e in self.spent)
            epsilon_i = self.decay_ratio * remaining
            if epsilon_i < self.epsilon_min:
                raise BudgetExhausted(
                    f"next allocation {epsilon_i:.6g} falls below epsilon_min "
                    f"{self.epsilon_min:g}; remaining budget {remaining:.6g}"
                )
            entry = BudgetEntry(query_id=query_id, epsilon=epsilon_i, timestamp=time.time())
            self.spent.append(entry)
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as handle:
                    handle.write(json.dumps(entry.to_json()) + "\n")
            return epsilon_i

    def to_json(self) -> dict:
        return {
            "total_epsilon": self.total_epsilon,
            "spent_epsilon": self.spent_epsilon,
            "remaining_epsilon": self.remaining_epsilon,
            "decay_ratio": self.decay_ratio,
            "epsilon_min": self.epsilon_min,
            "allocations": [entry.to_json() for entry in self.spent],
        }


@dataclass(frozen=True)
class RiskInputs:
    """Inputs to the privacy/utility trade-off loss alpha*(1-U) + beta*P."""

    utility: float
    privacy_loss: float
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.utility <= 1.0):
            raise ValueError(f"utility must lie in [0, 1], got {self.utility}")
        if not (0.0 <= self.privacy_loss <= 1.0):
            raise ValueError(f"privacy_loss must lie in [0, 1], got {self.privacy_loss}")
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise ValueError("alpha and beta must be non-negative with alpha + beta > 0")

    def loss(self) -> float:
        return self.alpha * (1.0 - self.utility) + self.beta * self.privacy_loss


@dataclass(frozen=True)
class SweepPoint:
    epsilon: float
    mse: float
    mae: float
    utility: float
    risk: float


@dataclass(frozen=True)
class SweepResult:
    points: tuple[SweepPoint, ...]
    best_epsilon: float
    alpha: float
    beta: float

    def to_csv(self) -> str:
        lines = ["epsilon,mse,mae,utility,risk"]
        for p in self.points:
            lines.append(f"{p.epsilon:g},{p.mse:.6f},{p.mae:.6f},{p.utility:.6f},{p.risk:.6f}")
        return "\n".join(lines) + "\n"


DEFAULT_EPSILON_GRID = (0.5, 1.0, 2.0, 4.0, 8.0)


def optimize_epsilon(
    dataset: Sequence,
    spec: QuerySpec,
    candidates: Sequence[float] = DEFAULT_EPSILON_GRID,
    alpha: float = 1.0,
    beta: float = 1.0,
    trials: int = 100,
    rng_seed: int = 0,
    shuffle_iterations: int = 3,
) -> SweepResult:
    """Pick the epsilon minimizing alpha*(1-U) + beta*P over the candidate grid.

    For each candidate the full pipeline (group shuffle, aggregation, noise)
    runs `trials` times against the query's raw cells. Utility is
    1 - mse/mse_ref with mse_ref measured at the smallest (noisiest) candidate;
    privacy loss is epsilon normalized by the largest candidate. Ties go to
    the smaller, more private epsilon.
    """
    if not candidates:
        raise EmptyGrid("epsilon candidate grid must be non-empty")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if any(eps <= 0 for eps in candidates):
        raise ValueError("all epsilon candidates must be positive")

    needed = frozenset({"region_id", "hour", "vehicle_count"})
    query_spec = spec if spec.projection is None else replace(spec, projection=spec.projection | needed)
    rows = execute_query(dataset, query_spec)
    if not rows:
        raise ValueError("query matched no records; nothing to calibrate against")
    partition = partition_groups(rows, key="region_id")
    raw_grid = aggregate_density(rows)
    delta_f = sensitivity(spec)

    # Vectorized trial loop: cell sums over the shuffled order via bincount,
    # with noise drawn in the same sorted-key order inject_noise uses. The
    # equivalence with the grid-object path is pinned by a unit test.
    sorted_keys = raw_grid.sorted_keys()
    slot_of = {key: i for i, key in enumerate(sorted_keys)}
    row_slots = np.array(
        [slot_of[(row["region_id"], row["hour"])] for row in rows], dtype=np.int64
    )
    row_counts = np.array([row["vehicle_count"] for row in rows], dtype=float)
    raw_sums = np.array([raw_grid.cells[key] for key in sorted_keys], dtype=float)

    ordered = sorted(set(float(e) for e in candidates))
    eps_max = ordered[-1]
    mean_mse: dict[float, float] = {}
    mean_mae: dict[float, float] = {}

    for eps_index, epsilon in enumerate(ordered):
        scale = delta_f / epsilon
        mse_acc = 0.0
        mae_acc = 0.0
        for trial in range(trials):
            trial_config = ShuffleConfig(
                iterations=shuffle_iterations,
                rng_seed=_derive_seed(rng_seed, eps_index, trial),
            )
            sequence, _ = iterative_shuffle(partition, trial_config)
            order = np.asarray(sequence, dtype=np.int64)
            shuffled_sums = np.bincount(
                row_slots[order], weights=row_counts[order], minlength=len(sorted_keys)
            )
            noise_rng = np.random.default_rng(
                np.random.SeedSequence([rng_seed, eps_index, trial, 1])
            )
            noise = laplace_noise_array(scale, noise_rng, len(sorted_keys))
            residual = shuffled_sums + noise - raw_sums
            mse_acc += float(np.mean(residual**2))
            mae_acc += float(np.mean(np.abs(residual)))
        mean_mse[epsilon] = mse_acc / trials
        mean_mae[epsilon] = mae_acc / trials

    mse_ref = mean_mse[ordered[0]]
    points: list[SweepPoint] = []
    best: SweepPoint | None = None
    for epsilon in ordered:
        utility = 1.0 - (mean_mse[epsilon] / mse_ref if mse_ref > 0 else 0.0)
        utility = min(1.0, max(0.0, utility))
        privacy_loss = epsilon / eps_max
        risk = RiskInputs(
            utility=utility, privacy_loss=privacy_loss, alpha=alpha, beta=beta
        ).loss()
        point = SweepPoint(
            epsilon=epsilon,
            mse=mean_mse[epsilon],
            mae=mean_mae[epsilon],
            utility=utility,
            risk=risk,
        )
        points.append(point)
        if best is None or point.risk < best.risk:
            # candidates scan in increasing order, so ties keep the smaller epsilon
            best = point
    assert best is not None
    return SweepResult(points=tuple(points), best_epsilon=best.epsilon, alpha=alpha, beta=beta)


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])
