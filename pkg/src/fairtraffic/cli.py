"""Command-line entry points: generate, run, sweep, predict, heatmap, serve."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .dp import DEFAULT_EPSILON_GRID, PrivacyBudgetLedger, optimize_epsilon
from .generator import default_config, generate_dataset
from .metrics import fairness_report
from .model import Weather, atomic_write_text, load_csv, records_to_csv
from .pipeline import export_heatmap, prediction_pair, run_pipeline
from .query import QuerySpec

LEDGER_ENV_VAR = "FAIRTRAFFIC_LEDGER"


def _add_data_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--data",
        type=Path,
        default=None,
        help="dataset CSV; omitted -> generate the default synthetic dataset in memory",
    )
    parser.add_argument("--seed", type=int, default=42, help="master RNG seed")


def _load_records(args: argparse.Namespace):
    if args.data is not None:
        return load_csv(args.data)
    return generate_dataset(default_config(rng_seed=args.seed))


def _full_spec() -> QuerySpec:
    return QuerySpec(hour_range=(0, 23))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairtraffic",
        description="Privacy-preserving vehicular traffic analytics pipeline",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="emit a synthetic dataset CSV")
    p_gen.add_argument("--cities", type=int, default=50, help="number of cities (1..50)")
    p_gen.add_argument("--days", type=int, default=30)
    p_gen.add_argument("--seed", type=int, default=42)
    p_gen.add_argument("--out", type=Path, required=True, help="output CSV path")

    p_run = sub.add_parser("run", help="full pipeline: noisy grid + fairness report")
    _add_data_arg(p_run)
    p_run.add_argument(
        "--epsilon", type=float, default=None,
        help="fixed epsilon override (default 2.0 unless --ledger is given)",
    )
    p_run.add_argument(
        "--ledger", type=Path, default=None,
        help="JSONL budget ledger; allocates epsilon from it instead of the override",
    )
    p_run.add_argument("--total-epsilon", type=float, default=2.0)
    p_run.add_argument("--decay-ratio", type=float, default=0.5)
    p_run.add_argument("--epsilon-min", type=float, default=0.1)
    p_run.add_argument("--iterations", type=int, default=3, help="shuffle iterations")
    p_run.add_argument("--trials", type=int, default=100, help="fairness noise trials")
    p_run.add_argument("--out-grid", type=Path, required=True)
    p_run.add_argument("--out-fairness", type=Path, required=True)

    p_sweep = sub.add_parser("sweep", help="epsilon sweep CSV and risk-minimizing choice")
    _add_data_arg(p_sweep)
    p_sweep.add_argument(
        "--eps",
        type=str,
        default=",".join(str(e) for e in DEFAULT_EPSILON_GRID),
        help="comma-separated epsilon candidates",
    )
    p_sweep.add_argument("--trials", type=int, default=100)
    p_sweep.add_argument("--alpha", type=float, default=1.0)
    p_sweep.add_argument("--beta", type=float, default=1.0)
    p_sweep.add_argument("--out", type=Path, required=True, help="sweep CSV path")

    p_pred = sub.add_parser("predict", help="24h original-vs-noisy prediction CSV")
    _add_data_arg(p_pred)
    p_pred.add_argument("--region", type=str, default="Oslo")
    p_pred.add_argument("--weather", type=str, default="clear")
    p_pred.add_argument("--epsilon", type=float, default=2.0)
    p_pred.add_argument("--out", type=Path, required=True)

    p_heat = sub.add_parser("heatmap", help="per-region heatmap export JSON")
    _add_data_arg(p_heat)
    p_heat.add_argument("--hours", type=str, default="7,17", help="comma-separated hours")
    p_heat.add_argument("--epsilon", type=float, default=2.0)
    p_heat.add_argument("--out", type=Path, required=True)

    p_serve = sub.add_parser("serve", help="start the budgeted query service")
    _add_data_arg(p_serve)
    p_serve.add_argument("--host", type=str, default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--total-epsilon", type=float, default=2.0)
    p_serve.add_argument("--decay-ratio", type=float, default=0.5)
    p_serve.add_argument("--epsilon-min", type=float, default=0.1)
    p_serve.add_argument("--epsilon", type=float, default=2.0, help="operating epsilon for cached releases")
    p_serve.add_argument(
        "--ledger-path",
        type=Path,
        default=None,
        help=f"budget ledger JSONL (default: ${LEDGER_ENV_VAR} if set)",
    )
    return parser


def _cmd_generate(args: argparse.Namespace) -> int:
    if not (1 <= args.cities <= 50):
        raise ValueError("--cities must be in 1..50")
    config = default_config(cities=args.cities, days=args.days, rng_seed=args.seed)
    records = generate_dataset(config)
    atomic_write_text(args.out, records_to_csv(records))
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    import numpy as np

    from .dp import inject_noise
    from .pipeline import PipelineRunConfig

    if args.ledger is not None and args.epsilon is not None:
        raise ValueError("--epsilon and --ledger are mutually exclusive")
    config = PipelineRunConfig(
        dataset_path=args.data,
        shuffle_iterations=args.iterations,
        epsilon=None if args.ledger is not None else (2.0 if args.epsilon is None else args.epsilon),
        ledger_driven=args.ledger is not None,
        rng_seed=args.seed,
        grid_output=args.out_grid,
        fairness_output=args.out_fairness,
    )
    if config.ledger_driven:
        ledger = PrivacyBudgetLedger(
            total_epsilon=args.total_epsilon,
            decay_ratio=args.decay_ratio,
            epsilon_min=args.epsilon_min,
            path=args.ledger,
        )
        epsilon = ledger.allocate("cli-run")
        print(f"ledger charged epsilon={epsilon:g}, remaining {ledger.remaining_epsilon:g}")
    else:
        epsilon = config.epsilon

    records = _load_records(args)
    result = run_pipeline(
        records,
        _full_spec(),
        epsilon=epsilon,
        shuffle_iterations=config.shuffle_iterations,
        rng_seed=config.rng_seed,
    )
    grid_payload = {
        "epsilon": epsilon,
        "feature": "density_count",
        "seed": args.seed,
        "cells": [
            {"region_id": key[0], "hour": key[1], "noisy_value": result.noisy_grid.cells[key]}
            for key in result.noisy_grid.sorted_keys()
        ],
        "shuffle_trace": result.trace.to_json(),
    }
    atomic_write_text(args.out_grid, json.dumps(grid_payload, indent=2, sort_keys=True) + "\n")

    def trials():
        for t in range(args.trials):
            rng = np.random.default_rng(np.random.SeedSequence([args.seed, 3, t]))
            yield inject_noise(result.shuffled_grid, result.params, rng)

    report = fairness_report(
        result.partition, result.shuffled_sequence, result.raw_grid, trials()
    )
    atomic_write_text(
        args.out_fairness, json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n"
    )
    print(
        f"noisy grid: {len(result.noisy_grid)} cells at epsilon={epsilon:g}; "
        f"max proportion deviation {report.max_proportion_deviation:g}; "
        f"unfair={report.unfair}"
    )
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    records = _load_records(args)
    candidates = [float(e) for e in args.eps.split(",") if e.strip()]
    result = optimize_epsilon(
        records,
        _full_spec(),
        candidates=candidates,
        alpha=args.alpha,
        beta=args.beta,
        trials=args.trials,
        rng_seed=args.seed,
    )
    atomic_write_text(args.out, result.to_csv())
    print(f"best epsilon: {result.best_epsilon:g} (alpha={args.alpha:g}, beta={args.beta:g})")
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    records = _load_records(args)
    forecast = [Weather(args.weather)] * 24
    original, noisy = prediction_pair(
        records,
        args.region,
        forecast,
        epsilon=args.epsilon,
        rng_seed=args.seed,
    )
    lines = ["hour,original,noisy"]
    lines.extend(f"{h},{original[h]},{noisy[h]}" for h in range(24))
    atomic_write_text(args.out, "\n".join(lines) + "\n")
    print(f"wrote 24h prediction pair for {args.region} to {args.out}")
    return 0


def _cmd_heatmap(args: argparse.Namespace) -> int:
    from .pipeline import noisy_hourly_release

    records = _load_records(args)
    hours = [int(h) for h in args.hours.split(",") if h.strip()]
    release = (
        noisy_hourly_release(records, epsilon=args.epsilon, rng_seed=args.seed)
        if records
        else None
    )
    exports = [
        export_heatmap(records, hour, epsilon=args.epsilon, rng_seed=args.seed, noisy_grid=release)
        for hour in hours
    ]
    payload = {"exports": [e.to_json() for e in exports]}
    atomic_write_text(args.out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote heatmap export for hours {hours} to {args.out}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    ledger_path = args.ledger_path
    if ledger_path is None and os.environ.get(LEDGER_ENV_VAR):
        ledger_path = Path(os.environ[LEDGER_ENV_VAR])
    ledger = PrivacyBudgetLedger(
        total_epsilon=args.total_epsilon,
        decay_ratio=args.decay_ratio,
        epsilon_min=args.epsilon_min,
        path=ledger_path,
    )
    records = _load_records(args)
    app = create_app(
        records,
        ledger,
        operating_epsilon=args.epsilon,
        rng_seed=args.seed,
    )
    print(f"serving {len(records)} records on {args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "predict": _cmd_predict,
    "heatmap": _cmd_heatmap,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except BrokenPipeError:  # pragma: no cover - shell plumbing
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
