"""Laplace mechanism, budget ledger, and epsilon optimizer."""

from __future__ import annotations

import json
import math
import threading

import numpy as np
import pytest

from fairtraffic.dp import (
    BudgetExhausted,
    EmptyGrid,
    LaplaceParams,
    NonPositiveScale,
    PrivacyBudgetLedger,
    RiskInputs,
    inject_noise,
    laplace_inverse_cdf,
    laplace_noise_array,
    laplace_sample,
    optimize_epsilon,
)
from fairtraffic.generator import default_config, generate_dataset
from fairtraffic.query import DensityCellGrid, QuerySpec, Stage, WrongStage


class TestLaplaceSampling:
    def test_median_maps_to_zero(self):
        assert laplace_inverse_cdf(0.5, 2.0) == 0.0

    def test_quantile_spot_value(self):
        # Analytic inverse CDF evaluated independently of the implementation.
        u, b = 0.9, 1.0
        expected = -b * math.copysign(1.0, u - 0.5) * math.log(1.0 - 2.0 * abs(u - 0.5))
        assert laplace_inverse_cdf(u, b) == pytest.approx(expected, abs=1e-9)
        assert laplace_inverse_cdf(u, b) == pytest.approx(-math.log(0.2), abs=1e-9)

    def test_lower_tail_is_negative(self):
        assert laplace_inverse_cdf(0.1, 1.0) == pytest.approx(math.log(0.2), abs=1e-9)

    def test_symmetry(self):
        for u in (0.6, 0.75, 0.93):
            assert laplace_inverse_cdf(u, 1.5) == pytest.approx(
                -laplace_inverse_cdf(1.0 - u, 1.5), abs=1e-12
            )

    def test_non_positive_scale_rejected(self):
        with pytest.raises(NonPositiveScale):
            laplace_inverse_cdf(0.3, 0.0)
        with pytest.raises(NonPositiveScale):
            laplace_sample(-1.0, np.random.default_rng(0))
        with pytest.raises(NonPositiveScale):
            laplace_noise_array(0.0, np.random.default_rng(0), 4)

    def test_moments_match_distribution(self):
        # Laplace(0, b) has mean 0 and variance 2 b^2.
        b = 0.5
        samples = laplace_noise_array(b, np.random.default_rng(1), 100_000)
        assert abs(samples.mean()) <= 0.01
        assert samples.var() == pytest.approx(2 * b * b, abs=0.02)

    def test_scalar_and_vector_paths_agree(self):
        scalar = [laplace_sample(0.7, np.random.default_rng(42)) for _ in range(1)]
        vector = laplace_noise_array(0.7, np.random.default_rng(42), 1)
        assert scalar[0] == pytest.approx(float(vector[0]))


class TestLaplaceParams:
    def test_scale_is_the_defining_quotient(self):
        for epsilon, delta_f in [(2.0, 1.0), (0.5, 1.0), (3.0, 13.0), (49.0, 1.0)]:
            params = LaplaceParams.from_budget(epsilon, delta_f)
            assert params.scale == delta_f / epsilon
            assert params.scale * params.epsilon == pytest.approx(delta_f, rel=1e-12)

    def test_paper_operating_point(self):
        assert LaplaceParams.from_budget(2.0, 1.0).scale == 0.5

    def test_inconsistent_scale_rejected(self):
        with pytest.raises(ValueError):
            LaplaceParams(epsilon=2.0, sensitivity=1.0, scale=1.0)

    def test_non_positive_rejected(self):
        with pytest.raises(ValueError):
            LaplaceParams.from_budget(0.0, 1.0)
        with pytest.raises(ValueError):
            LaplaceParams.from_budget(1.0, -1.0)


def shuffled_grid(values: dict) -> DensityCellGrid:
    return DensityCellGrid(cells=values, stage=Stage.SHUFFLED)


class TestInjectNoise:
    def test_vanishing_noise_limit(self):
        grid = shuffled_grid({("Oslo", h): 100.0 + h for h in range(24)})
        params = LaplaceParams.from_budget(1e12, 1.0)
        noisy = inject_noise(grid, params, np.random.default_rng(0))
        for key in grid.cells:
            assert abs(noisy.cells[key] - grid.cells[key]) <= 1e-6
        assert noisy.stage == Stage.NOISY

    def test_wrong_stage_rejected(self):
        raw = DensityCellGrid(cells={("Oslo", 1): 5}, stage=Stage.RAW)
        params = LaplaceParams.from_budget(2.0, 1.0)
        with pytest.raises(WrongStage):
            inject_noise(raw, params, np.random.default_rng(0))
        noisy = DensityCellGrid(cells={("Oslo", 1): 5}, stage=Stage.NOISY)
        with pytest.raises(WrongStage):
            inject_noise(noisy, params, np.random.default_rng(0))

    def test_noise_is_fresh_but_seeded(self):
        grid = shuffled_grid({("Oslo", h): 50.0 for h in range(10)})
        params = LaplaceParams.from_budget(2.0, 1.0)
        a = inject_noise(grid, params, np.random.default_rng(5))
        b = inject_noise(grid, params, np.random.default_rng(5))
        c = inject_noise(grid, params, np.random.default_rng(6))
        assert a.cells == b.cells
        assert a.cells != c.cells

    def test_group_variance_ratio_uniform(self):
        # Two groups of cells, equal scale: empirical noise variances must
        # agree within 10% over 10^4 trials.
        cells = {("A", h): 100.0 for h in range(10)}
        cells.update({("B", h): 900.0 for h in range(10)})
        grid = shuffled_grid(cells)
        params = LaplaceParams.from_budget(2.0, 1.0)
        rng = np.random.default_rng(17)
        sums = {"A": 0.0, "B": 0.0}
        sq = {"A": 0.0, "B": 0.0}
        n = {"A": 0, "B": 0}
        for _ in range(10_000):
            noisy = inject_noise(grid, params, rng)
            for key, value in noisy.cells.items():
                residual = value - cells[key]
                sums[key[0]] += residual
                sq[key[0]] += residual * residual
                n[key[0]] += 1
        var = {g: sq[g] / n[g] - (sums[g] / n[g]) ** 2 for g in ("A", "B")}
        assert 0.9 <= var["A"] / var["B"] <= 1.1

    def test_density_ratio_bounded_analytically(self):
        # For neighboring cells differing by the sensitivity, the Laplace
        # density ratio is at most e^epsilon at every point.
        epsilon, delta_f = 2.0, 1.0
        b = delta_f / epsilon

        def density(x, center):
            return math.exp(-abs(x - center) / b) / (2 * b)

        xs = np.linspace(-10, 10, 2001)
        ratios = [density(x, 0.0) / density(x, delta_f) for x in xs]
        assert max(ratios) <= math.exp(epsilon) * (1 + 1e-12)


class TestPrivacyBudgetLedger:
    def test_geometric_schedule(self):
        ledger = PrivacyBudgetLedger(total_epsilon=2.0, decay_ratio=0.5, epsilon_min=0.01)
        charges = [ledger.allocate(f"q{i}") for i in range(4)]
        assert charges == pytest.approx([1.0, 0.5, 0.25, 0.125])

    def test_threshold_refusal(self):
        ledger = PrivacyBudgetLedger(total_epsilon=2.0, decay_ratio=0.5, epsilon_min=0.2)
        assert ledger.allocate("q1") == pytest.approx(1.0)
        assert ledger.allocate("q2") == pytest.approx(0.5)
        assert ledger.allocate("q3") == pytest.approx(0.25)
        with pytest.raises(BudgetExhausted):
            ledger.allocate("q4")
        # refusal leaves the ledger unchanged
        assert len(ledger.spent) == 3

    def test_partial_sums_stay_below_total(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            total = float(rng.uniform(0.5, 10.0))
            ratio = float(rng.uniform(0.05, 0.95))
            ledger = PrivacyBudgetLedger(total, ratio, epsilon_min=1e-12)
            charges = []
            for i in range(40):
                try:
                    charges.append(ledger.allocate(f"q{i}"))
                except BudgetExhausted:
                    break
            assert charges and sum(charges) < total
            assert all(b < a for a, b in zip(charges, charges[1:]))
            expected = total * (1 - (1 - ratio) ** len(charges))
            assert sum(charges) == pytest.approx(expected, rel=1e-9)

    def test_persist_and_replay(self, tmp_path):
        path = tmp_path / "ledger.jsonl"
        ledger = PrivacyBudgetLedger(2.0, 0.5, 0.1, path=path)
        for i in range(3):
            ledger.allocate(f"q{i}")
        reopened = PrivacyBudgetLedger(2.0, 0.5, 0.1, path=path)
        assert reopened.spent == ledger.spent
        assert reopened.remaining_epsilon == pytest.approx(ledger.remaining_epsilon)
        # continuing after restart keeps the geometric schedule
        assert reopened.allocate("q3") == pytest.approx(0.125)

    def test_ledger_file_is_json_lines(self, tmp_path):
        path = tmp_path / "ledger.jsonl"
        ledger = PrivacyBudgetLedger(2.0, 0.5, 0.1, path=path)
        ledger.allocate("first")
        ledger.allocate("second")
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 2
        first = json.loads(lines[0])
        assert first["query_id"] == "first"
        assert first["epsilon"] == pytest.approx(1.0)

    def test_concurrent_allocations_never_overspend(self):
        ledger = PrivacyBudgetLedger(total_epsilon=2.0, decay_ratio=0.5, epsilon_min=1e-9)
        results: list[float] = []
        errors: list[Exception] = []

        def worker(i: int) -> None:
            try:
                results.append(ledger.allocate(f"t{i}"))
            except BudgetExhausted as exc:
                errors.append(exc)

        threads = [threading.Thread(target=worker, args=(i,)) for i in range(64)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sum(results) < 2.0
        assert sorted(results) == sorted(e.epsilon for e in ledger.spent)
        decreasing = [e.epsilon for e in ledger.spent]
        assert all(b < a for a, b in zip(decreasing, decreasing[1:]))

    def test_invalid_parameters_rejected(self):
        with pytest.raises(ValueError):
            PrivacyBudgetLedger(0.0)
        with pytest.raises(ValueError):
            PrivacyBudgetLedger(1.0, decay_ratio=1.0)
        with pytest.raises(ValueError):
            PrivacyBudgetLedger(1.0, epsilon_min=0.0)


class TestRiskInputs:
    def test_loss_formula(self):
        risk = RiskInputs(utility=0.75, privacy_loss=0.25, alpha=1.0, beta=1.0)
        assert risk.loss() == pytest.approx(0.5)

    def test_bounds_enforced(self):
        with pytest.raises(ValueError):
            RiskInputs(utility=1.5, privacy_loss=0.0, alpha=1.0, beta=1.0)
        with pytest.raises(ValueError):
            RiskInputs(utility=0.5, privacy_loss=0.0, alpha=0.0, beta=0.0)


@pytest.fixture(scope="module")
def sweep_dataset():
    return generate_dataset(default_config(cities=5, days=5, rng_seed=2))


class TestOptimizeEpsilon:
    SPEC = QuerySpec(hour_range=(0, 23))

    def test_pure_utility_picks_largest(self, sweep_dataset):
        result = optimize_epsilon(
            sweep_dataset, self.SPEC, candidates=(0.5, 2.0, 8.0),
            alpha=1.0, beta=0.0, trials=10, rng_seed=0,
        )
        assert result.best_epsilon == 8.0

    def test_pure_privacy_picks_smallest(self, sweep_dataset):
        result = optimize_epsilon(
            sweep_dataset, self.SPEC, candidates=(0.5, 2.0, 8.0),
            alpha=0.0, beta=1.0, trials=10, rng_seed=0,
        )
        assert result.best_epsilon == 0.5

    def test_empty_grid_rejected(self, sweep_dataset):
        with pytest.raises(EmptyGrid):
            optimize_epsilon(sweep_dataset, self.SPEC, candidates=())

    def test_trial_loop_matches_public_pipeline_path(self, sweep_dataset):
        # The sweep's vectorized inner loop must reproduce, bit for bit, the
        # error a trial would report when composed from the public operations.
        from fairtraffic.dp import _derive_seed
        from fairtraffic.metrics import mse as public_mse
        from fairtraffic.model import partition_groups
        from fairtraffic.query import Stage, aggregate_density, execute_query
        from fairtraffic.shuffler import ShuffleConfig, iterative_shuffle

        epsilon, trials, seed = 2.0, 3, 5
        result = optimize_epsilon(
            sweep_dataset, self.SPEC, candidates=(epsilon,), trials=trials, rng_seed=seed
        )
        rows = execute_query(sweep_dataset, self.SPEC)
        partition = partition_groups(rows)
        raw = aggregate_density(rows)
        params = LaplaceParams.from_budget(epsilon, 1.0)
        total = 0.0
        for trial in range(trials):
            config = ShuffleConfig(iterations=3, rng_seed=_derive_seed(seed, 0, trial))
            sequence, _ = iterative_shuffle(partition, config)
            shuffled = aggregate_density([rows[i] for i in sequence], stage=Stage.SHUFFLED)
            rng = np.random.default_rng(np.random.SeedSequence([seed, 0, trial, 1]))
            total += public_mse(raw, inject_noise(shuffled, params, rng))
        assert result.points[0].mse == pytest.approx(total / trials, rel=1e-12)

    def test_sweep_rows_cover_candidates(self, sweep_dataset):
        result = optimize_epsilon(
            sweep_dataset, self.SPEC, candidates=(0.5, 2.0, 8.0), trials=10, rng_seed=0
        )
        assert [p.epsilon for p in result.points] == [0.5, 2.0, 8.0]
        assert result.points[0].utility == 0.0  # normalized against itself
        csv_text = result.to_csv()
        assert csv_text.splitlines()[0] == "epsilon,mse,mae,utility,risk"
        assert len(csv_text.splitlines()) == 4
