/** Thin typed client for the service API. Fetch is injectable for tests. */

import type {
  BudgetRefusalDetail,
  BudgetView,
  HeatmapPayload,
  PredictionResponse,
  QueryRequest,
  QueryResponse,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** The ledger refused to fund the query; the session must stop submitting. */
export class BudgetExhaustedError extends Error {
  constructor(public readonly detail: BudgetRefusalDetail) {
    super(detail.error);
    this.name = "BudgetExhaustedError";
  }
}

/** Any non-refusal failure: bad spec, unknown region, service unreachable. */
export class ServiceError extends Error {
  constructor(message: string, public readonly status: number | null) {
    super(message);
    this.name = "ServiceError";
  }
}

async function readDetail(response: Response): Promise<unknown> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    return body.detail ?? body;
  } catch {
    return null;
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`);
    } catch (cause) {
      throw new ServiceError(`service unreachable: ${String(cause)}`, null);
    }
    if (!response.ok) {
      const detail = await readDetail(response);
      throw new ServiceError(
        typeof detail === "string" ? detail : `request failed (${response.status})`,
        response.status,
      );
    }
    return (await response.json()) as T;
  }

  async heatmap(hour: number): Promise<HeatmapPayload> {
    return this.get<HeatmapPayload>(`/heatmap?hour=${hour}`);
  }

  async budget(): Promise<BudgetView> {
    return this.get<BudgetView>("/budget");
  }

  async predict(region: string, weather = "clear"): Promise<PredictionResponse> {
    const params = new URLSearchParams({ region, weather });
    return this.get<PredictionResponse>(`/predict?${params.toString()}`);
  }

  async query(request: QueryRequest): Promise<QueryResponse> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}/query`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(request),
      });
    } catch (cause) {
      throw new ServiceError(`service unreachable: ${String(cause)}`, null);
    }
    if (response.status === 429) {
      const detail = (await readDetail(response)) as BudgetRefusalDetail;
      throw new BudgetExhaustedError(detail);
    }
    if (!response.ok) {
      const detail = await readDetail(response);
      throw new ServiceError(
        typeof detail === "string" ? detail : `query failed (${response.status})`,
        response.status,
      );
    }
    return (await response.json()) as QueryResponse;
  }
}
