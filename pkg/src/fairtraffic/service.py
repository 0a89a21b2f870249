"""Budgeted HTTP boundary over the pipeline: /query, /heatmap, /predict, /budget.

Analyst queries draw from the decaying privacy ledger and get fresh noise per
request. The heatmap and prediction views are post-processing of one-time
noisy baseline releases made at the configured operating epsilon and cached,
so browsing hours or regions never re-spends budget. Raw (pre-noise) cell
values never cross this boundary.
"""

from __future__ import annotations

import itertools
import threading
from typing import Mapping, Sequence

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

from .dp import BudgetExhausted, PrivacyBudgetLedger
from .metrics import InsufficientHistory, predict_24h_from_noisy
from .model import TrafficRecord, Weather
from .pipeline import (
    InvalidHour,
    displayed_count,
    export_heatmap,
    noisy_history_release,
    noisy_hourly_release,
    run_pipeline,
)
from .query import Feature, NoFilter, QuerySpec


DEFAULT_OPERATING_EPSILON = 2.0


class ServiceState:
    """Immutable dataset plus the mutable ledger and cached baseline releases."""

    def __init__(
        self,
        records: Sequence[TrafficRecord],
        ledger: PrivacyBudgetLedger,
        operating_epsilon: float = DEFAULT_OPERATING_EPSILON,
        shuffle_iterations: int = 3,
        rng_seed: int = 0,
    ) -> None:
        self.records = tuple(records)
        self.ledger = ledger
        self.operating_epsilon = operating_epsilon
        self.shuffle_iterations = shuffle_iterations
        self.rng_seed = rng_seed
        self._request_counter = itertools.count(1)
        self._cache_lock = threading.Lock()
        self._heatmap_release = None
        self._history_releases: dict[str, Mapping] = {}
        self.regions = sorted({r.region_id for r in self.records})

    def next_request_id(self) -> int:
        return next(self._request_counter)

    def heatmap_release(self):
        with self._cache_lock:
            if self._heatmap_release is None and self.records:
                self._heatmap_release = noisy_hourly_release(
                    self.records,
                    epsilon=self.operating_epsilon,
                    shuffle_iterations=self.shuffle_iterations,
                    rng_seed=self.rng_seed,
                )
            return self._heatmap_release

    def history_release(self, region: str):
        with self._cache_lock:
            if region not in self._history_releases:
                self._history_releases[region] = noisy_history_release(
                    self.records,
                    region,
                    epsilon=self.operating_epsilon,
                    shuffle_iterations=self.shuffle_iterations,
                    rng_seed=self.rng_seed,
                )
            return self._history_releases[region]


def _parse_forecast(weather: str) -> list[Weather]:
    parts = [p.strip() for p in weather.split(",") if p.strip()]
    try:
        if len(parts) == 1:
            return [Weather(parts[0])] * 24
        if len(parts) == 24:
            return [Weather(p) for p in parts]
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=f"unknown weather condition: {exc}") from exc
    raise HTTPException(
        status_code=400, detail="weather must be one condition or a 24-entry comma list"
    )


def create_app(
    records: Sequence[TrafficRecord],
    ledger: PrivacyBudgetLedger,
    operating_epsilon: float = DEFAULT_OPERATING_EPSILON,
    shuffle_iterations: int = 3,
    rng_seed: int = 0,
) -> FastAPI:
    state = ServiceState(
        records,
        ledger,
        operating_epsilon=operating_epsilon,
        shuffle_iterations=shuffle_iterations,
        rng_seed=rng_seed,
    )
    app = FastAPI(title="fairtraffic", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.service = state

    @app.post("/query")
    def handle_density_query(payload: dict) -> dict:
        try:
            spec = QuerySpec.from_json(payload)
            spec.validate()
        except NoFilter as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=f"invalid query spec: {exc}") from exc
        request_id = state.next_request_id()
        try:
            epsilon_i = state.ledger.allocate(f"q-{request_id:04d}")
        except BudgetExhausted as exc:
            raise HTTPException(
                status_code=429,
                detail={
                    "error": str(exc),
                    "remaining_epsilon": state.ledger.remaining_epsilon,
                    "epsilon_min": state.ledger.epsilon_min,
                },
            ) from exc
        result = run_pipeline(
            state.records,
            spec,
            epsilon=epsilon_i,
            shuffle_iterations=state.shuffle_iterations,
            rng_seed=_request_seed(state.rng_seed, request_id),
        )
        feature = Feature(spec.feature)
        cells = []
        for key in result.noisy_grid.sorted_keys():
            value = result.noisy_grid.cells[key]
            display = (
                displayed_count(value)
                if feature == Feature.DENSITY_COUNT
                else round(max(0.0, value), 1)
            )
            cells.append({"region_id": key[0], "hour": key[1], "value": display})
        return {
            "query_id": f"q-{request_id:04d}",
            "feature": feature.value,
            "cells": cells,
            "epsilon_charged": epsilon_i,
            "remaining_epsilon": state.ledger.remaining_epsilon,
        }

    @app.get("/heatmap")
    def heatmap(hour: int) -> dict:
        try:
            release = state.heatmap_release()
            export = export_heatmap(
                state.records,
                hour,
                epsilon=state.operating_epsilon,
                rng_seed=state.rng_seed,
                noisy_grid=release,
            )
        except InvalidHour as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return export.to_json()

    @app.get("/predict")
    def predict(region: str, weather: str = "clear") -> dict:
        if region not in state.regions:
            raise HTTPException(status_code=404, detail=f"unknown region {region!r}")
        forecast = _parse_forecast(weather)
        history = state.history_release(region)
        try:
            noisy = predict_24h_from_noisy(history, forecast)
        except InsufficientHistory as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {
            "region_id": region,
            "epsilon": state.operating_epsilon,
            "forecast": [w.value for w in forecast],
            "noisy_prediction": noisy,
        }

    @app.get("/budget")
    def budget() -> dict:
        return state.ledger.to_json()

    return app


def _request_seed(base_seed: int, request_id: int) -> int:
    import numpy as np

    return int(np.random.SeedSequence([base_seed, request_id]).generate_state(1)[0])
