"""Batch-wise fairly iterative shuffling: within-group then cross-group permutation.

Each iteration permutes records inside every group (local stage), then applies a
uniform permutation across the whole sequence (global stage). Both stages are
pure permutations, so group sizes and proportions are preserved exactly on
every run; iterating mixes positions and drives the block-level proportion
variance down toward its fully-mixed floor.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .model import GroupPartition


class BlockTooLarge(ValueError):
    """block_size exceeds the sequence length."""


@dataclass(frozen=True)
class ShuffleConfig:
    iterations: int = 3
    rng_seed: int = 0
    block_size: int | None = None  # None -> max(2, k // 10)

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.block_size is not None and self.block_size < 1:
            raise ValueError("block_size must be positive")


@dataclass
class ShuffleTrace:
    """Per-iteration permutations and the decaying proportion-variance series.

    `block_variance_series[t-1]` is the running mean, over the first t
    iterations, of the block-proportion deviation of the arrangement each
    iteration started from. The first sample is therefore the unshuffled
    input, so a segregated input contributes its full deviation once and is
    averaged away at rate 1/t as mixing takes over.
    """

    permutations: list[np.ndarray]
    block_variance_series: list[float]
    block_size: int

    def to_json(self) -> list[dict]:
        out = []
        for i, (perm, variance) in enumerate(
            zip(self.permutations, self.block_variance_series), start=1
        ):
            digest = hashlib.sha256(",".join(str(int(p)) for p in perm).encode()).hexdigest()
            out.append(
                {
                    "iteration": i,
                    "permutation_digest": digest,
                    "block_proportion_variance": variance,
                }
            )
        return out


def _iteration_rng(seed: int, iteration: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, iteration]))


def local_shuffle(
    partition: GroupPartition, rng: np.random.Generator
) -> dict[object, list[int]]:
    """Permute indices within each group; no index ever crosses groups."""
    shuffled: dict[object, list[int]] = {}
    for key, indices in partition.groups.items():
        arr = np.asarray(indices, dtype=np.int64)
        shuffled[key] = [int(i) for i in rng.permutation(arr)]
    return shuffled


def global_shuffle(
    groups: Mapping[object, Sequence[int]], rng: np.random.Generator
) -> list[int]:
    """Uniformly permute the concatenation of all per-group sequences."""
    concatenated: list[int] = []
    for indices in groups.values():
        concatenated.extend(int(i) for i in indices)
    if len(concatenated) <= 1:
        return concatenated
    arr = np.asarray(concatenated, dtype=np.int64)
    return [int(i) for i in rng.permutation(arr)]


def _group_codes(partition: GroupPartition) -> np.ndarray:
    """Group code per record index, vectorized over the partition's groups."""
    codes = np.empty(partition.total, dtype=np.int64)
    for code, indices in enumerate(partition.groups.values()):
        codes[np.asarray(indices, dtype=np.int64)] = code
    return codes


def _group_proportions(partition: GroupPartition) -> np.ndarray:
    return np.array([partition.proportions[key] for key in partition.groups], dtype=float)


def _block_deviation(codes_in_sequence: np.ndarray, phi: np.ndarray, block_size: int) -> float:
    deviations = []
    for start in range(0, len(codes_in_sequence), block_size):
        block = codes_in_sequence[start : start + block_size]
        block_props = np.bincount(block, minlength=len(phi)) / len(block)
        deviations.append(np.mean((block_props - phi) ** 2))
    return float(np.mean(deviations))


def block_proportion_variance(
    sequence: Sequence[int],
    partition: GroupPartition,
    block_size: int,
) -> float:
    """Mean squared deviation of within-block group proportions from the global ones.

    The sequence is cut into contiguous blocks of `block_size` (a shorter
    trailing block is kept); for every block and group the squared gap between
    the block-level proportion and the group's global proportion is averaged.
    """
    k = len(sequence)
    if block_size > k:
        raise BlockTooLarge(f"block_size {block_size} exceeds sequence length {k}")
    if block_size < 1:
        raise ValueError("block_size must be positive")
    codes = _group_codes(partition)[np.asarray(sequence, dtype=np.int64)]
    return _block_deviation(codes, _group_proportions(partition), block_size)


def default_block_size(length: int) -> int:
    return max(2, length // 10)


def iterative_shuffle(
    partition: GroupPartition, config: ShuffleConfig
) -> tuple[list[int], ShuffleTrace]:
    """Run local-then-global shuffling for the configured number of iterations.

    Each iteration draws fresh randomness from a substream derived from
    (rng_seed, iteration), so the whole run is deterministic per seed. Returns
    the final index sequence (always an exact permutation of the input) and
    the iteration trace.
    """
    k = partition.total
    block_size = config.block_size if config.block_size is not None else default_block_size(k)
    if block_size > k:
        raise BlockTooLarge(f"block_size {block_size} exceeds sequence length {k}")

    group_count = len(partition.groups)
    group_codes = _group_codes(partition)
    phi = _group_proportions(partition)

    sequence = np.arange(k, dtype=np.int64)
    permutations: list[tuple[int, ...]] = []
    variance_series: list[float] = []
    deviation_sum = 0.0

    for iteration in range(1, config.iterations + 1):
        codes_in_sequence = group_codes[sequence]
        # Running variance over visited arrangements: the one this iteration
        # starts from enters the average, so the original ordering contributes
        # its full deviation once and decays away at rate 1/n.
        deviation_sum += _block_deviation(codes_in_sequence, phi, block_size)
        variance_series.append(deviation_sum / iteration)

        rng = _iteration_rng(config.rng_seed, iteration)
        parts = [rng.permutation(sequence[codes_in_sequence == g]) for g in range(group_count)]
        sequence = rng.permutation(np.concatenate(parts))
        permutations.append(sequence)

    trace = ShuffleTrace(
        permutations=permutations,
        block_variance_series=variance_series,
        block_size=block_size,
    )
    return [int(i) for i in sequence], trace
