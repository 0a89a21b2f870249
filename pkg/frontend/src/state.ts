/** Session view state and its pure transitions.
 *
 * Two invariants are enforced here rather than trusted:
 *  - the budget gauge only ever moves down within a session;
 *  - the rendered heatmap is exactly the last payload accepted, never a
 *    stale fetch that resolved after a newer one.
 */

import type { HeatmapPayload, QueryResponse } from "./types.js";

export interface QueryHistoryEntry {
  summary: string;
  epsilonCharged: number;
  timestamp: number;
}

export interface ViewState {
  hour: number;
  selectedRegion: string | null;
  /** Gauge value; always the service's own /budget figure. Null until first sync. */
  remainingBudget: number | null;
  totalBudget: number | null;
  budgetExhausted: boolean;
  history: QueryHistoryEntry[];
  heatmap: HeatmapPayload | null;
  banner: string | null;
  queryInFlight: boolean;
}

export function initialState(hour = 17): ViewState {
  return {
    hour,
    selectedRegion: null,
    remainingBudget: null,
    totalBudget: null,
    budgetExhausted: false,
    history: [],
    heatmap: null,
    banner: null,
    queryInFlight: false,
  };
}

const EPSILON_TOLERANCE = 1e-12;

/** Sync the gauge to the service's budget view. The gauge may never rise. */
export function applyBudget(
  state: ViewState,
  remaining: number,
  total: number | null = null,
): ViewState {
  if (state.remainingBudget !== null && remaining > state.remainingBudget + EPSILON_TOLERANCE) {
    throw new Error(
      `budget gauge may not increase (${state.remainingBudget} -> ${remaining})`,
    );
  }
  return {
    ...state,
    remainingBudget: remaining,
    totalBudget: total ?? state.totalBudget,
  };
}

export function applyQueryResult(
  state: ViewState,
  summary: string,
  response: QueryResponse,
  timestamp: number,
): ViewState {
  const entry: QueryHistoryEntry = {
    summary,
    epsilonCharged: response.epsilon_charged,
    timestamp,
  };
  return applyBudget(
    { ...state, history: [...state.history, entry], banner: null },
    response.remaining_epsilon,
  );
}

export function applyRefusal(state: ViewState, remaining: number, message: string): ViewState {
  return applyBudget({ ...state, budgetExhausted: true, banner: message }, remaining);
}

export function applyHeatmap(state: ViewState, payload: HeatmapPayload): ViewState {
  return { ...state, heatmap: payload, hour: payload.hour, banner: null };
}

export function applyBanner(state: ViewState, message: string): ViewState {
  return { ...state, banner: message };
}

export function canSubmit(state: ViewState): boolean {
  return !state.queryInFlight && !state.budgetExhausted;
}
