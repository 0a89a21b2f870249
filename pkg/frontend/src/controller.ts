/** Session orchestration: one analyst, one in-flight query, no stale renders.
 *
 * Every interaction ends by syncing the gauge to GET /budget, so the number
 * on screen is always the service's own figure rather than client arithmetic.
 */

import { ApiClient, BudgetExhaustedError, ServiceError } from "./api.js";
import {
  applyBanner,
  applyBudget,
  applyHeatmap,
  applyQueryResult,
  applyRefusal,
  canSubmit,
  initialState,
  type ViewState,
} from "./state.js";
import type { QueryRequest } from "./types.js";

export type StateListener = (state: ViewState) => void;

export function summarizeQuery(request: QueryRequest): string {
  const parts: string[] = [];
  if (request.regions?.length) {
    parts.push(`regions=${request.regions.join("|")}`);
  }
  if (request.bbox) {
    parts.push("bbox");
  }
  if (request.hour_range) {
    parts.push(`hours=${request.hour_range[0]}-${request.hour_range[1]}`);
  }
  if (request.date_range) {
    parts.push(`dates=${request.date_range[0]}..${request.date_range[1]}`);
  }
  parts.push(request.feature ?? "density_count");
  return parts.join(" ");
}

export class SessionController {
  private state: ViewState;
  private listeners: StateListener[] = [];
  private heatmapToken = 0;

  constructor(
    private readonly api: ApiClient,
    private readonly now: () => number = () => Date.now(),
  ) {
    this.state = initialState();
  }

  getState(): ViewState {
    return this.state;
  }

  subscribe(listener: StateListener): void {
    this.listeners.push(listener);
  }

  private setState(next: ViewState): void {
    this.state = next;
    for (const listener of this.listeners) {
      listener(next);
    }
  }

  canSubmit(): boolean {
    return canSubmit(this.state);
  }

  /** Initial sync: budget first, then the default hour's heatmap. */
  async start(): Promise<void> {
    await this.refreshBudget();
    await this.loadHeatmap(this.state.hour);
  }

  async refreshBudget(): Promise<void> {
    try {
      const view = await this.api.budget();
      this.setState(
        applyBudget(this.state, view.remaining_epsilon, view.total_epsilon),
      );
    } catch (error) {
      if (error instanceof ServiceError) {
        this.setState(applyBanner(this.state, `service unreachable: ${error.message}`));
        return;
      }
      throw error;
    }
  }

  /** Slider moves cancel any slower, superseded fetch: last request wins. */
  async loadHeatmap(hour: number): Promise<void> {
    const token = ++this.heatmapToken;
    let payload;
    try {
      payload = await this.api.heatmap(hour);
    } catch (error) {
      if (error instanceof ServiceError) {
        if (token === this.heatmapToken) {
          this.setState(applyBanner(this.state, `heatmap unavailable: ${error.message}`));
        }
        return;
      }
      throw error;
    }
    if (token !== this.heatmapToken) {
      return; // a newer slider position superseded this fetch
    }
    this.setState(applyHeatmap(this.state, payload));
  }

  async submitQuery(request: QueryRequest): Promise<void> {
    if (!this.canSubmit()) {
      return;
    }
    this.setState({ ...this.state, queryInFlight: true });
    try {
      const response = await this.api.query(request);
      this.setState(
        applyQueryResult(this.state, summarizeQuery(request), response, this.now()),
      );
    } catch (error) {
      if (error instanceof BudgetExhaustedError) {
        this.setState(
          applyRefusal(
            this.state,
            error.detail.remaining_epsilon,
            `privacy budget exhausted; submissions disabled (remaining ε = ` +
              `${error.detail.remaining_epsilon.toFixed(4)} < ε_min = ` +
              `${error.detail.epsilon_min})`,
          ),
        );
      } else if (error instanceof ServiceError) {
        this.setState(applyBanner(this.state, `query failed: ${error.message}`));
      } else {
        throw error;
      }
    } finally {
      this.setState({ ...this.state, queryInFlight: false });
    }
    await this.refreshBudget();
  }

  selectRegion(region: string | null): void {
    this.setState({ ...this.state, selectedRegion: region });
  }
}
