/** Wire types mirroring the service's JSON payloads, field for field. */

export type WeatherCondition = "clear" | "rain" | "fog" | "snow";

export type QueryFeature = "density_count" | "mean_speed";

export interface BoundingBoxPayload {
  min_lat: number;
  min_lon: number;
  max_lat: number;
  max_lon: number;
}

/** Body of POST /query. At least one filter must be present. */
export interface QueryRequest {
  regions?: string[] | null;
  bbox?: BoundingBoxPayload | null;
  date_range?: [string, string] | null;
  hour_range?: [number, number] | null;
  feature?: QueryFeature;
  projection?: string[] | null;
}

export interface QueryCell {
  region_id: string;
  hour: number;
  value: number;
}

export interface QueryResponse {
  query_id: string;
  feature: QueryFeature;
  cells: QueryCell[];
  epsilon_charged: number;
  remaining_epsilon: number;
}

export interface HeatmapEntry {
  region_id: string;
  latitude: number;
  longitude: number;
  intensity: number;
  noisy_count: number;
}

export interface HeatmapPayload {
  hour: number;
  epsilon: number;
  entries: HeatmapEntry[];
  metadata: Record<string, unknown>;
}

export interface BudgetAllocation {
  query_id: string;
  epsilon: number;
  timestamp: number;
}

export interface BudgetView {
  total_epsilon: number;
  spent_epsilon: number;
  remaining_epsilon: number;
  decay_ratio: number;
  epsilon_min: number;
  allocations: BudgetAllocation[];
}

export interface PredictionResponse {
  region_id: string;
  epsilon: number;
  forecast: WeatherCondition[];
  noisy_prediction: number[];
}

/** Detail body the service returns with HTTP 429 when the ledger refuses. */
export interface BudgetRefusalDetail {
  error: string;
  remaining_epsilon: number;
  epsilon_min: number;
}
