/** In-memory stand-in for the service, faithful to its wire contract:
 * geometric budget decay on /query, cached-release semantics on /heatmap,
 * and the exact JSON shapes the Python service emits.
 */

import type { FetchLike } from "../src/api.js";
import type {
  BudgetView,
  HeatmapPayload,
  QueryResponse,
} from "../src/types.js";

const REGIONS = [
  { region_id: "Oslo", latitude: 59.91, longitude: 10.75 },
  { region_id: "Bergen", latitude: 60.39, longitude: 5.32 },
  { region_id: "Trondheim", latitude: 63.43, longitude: 10.4 },
  { region_id: "Tromso", latitude: 69.65, longitude: 18.96 },
];

function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export class MockService {
  totalEpsilon = 2.0;
  decayRatio = 0.5;
  epsilonMin = 0.1;
  allocations: { query_id: string; epsilon: number; timestamp: number }[] = [];
  requestLog: string[] = [];
  private queryCounter = 0;
  private noiseCounter = 0;

  get spentEpsilon(): number {
    return this.allocations.reduce((acc, a) => acc + a.epsilon, 0);
  }

  get remainingEpsilon(): number {
    return this.totalEpsilon - this.spentEpsilon;
  }

  budgetView(): BudgetView {
    return {
      total_epsilon: this.totalEpsilon,
      spent_epsilon: this.spentEpsilon,
      remaining_epsilon: this.remainingEpsilon,
      decay_ratio: this.decayRatio,
      epsilon_min: this.epsilonMin,
      allocations: [...this.allocations],
    };
  }

  heatmapPayload(hour: number): HeatmapPayload {
    // Deterministic per hour, with awkward doubles so bit-for-bit checks bite.
    const entries = REGIONS.map((region, i) => {
      const raw = Math.abs(Math.sin(hour * 2.137 + i * 1.618));
      return {
        ...region,
        intensity: raw,
        noisy_count: Math.max(0, Math.round(raw * 1000 + hour)),
      };
    });
    return { hour, epsilon: 2.0, entries, metadata: { seed: 5, regions: entries.length } };
  }

  fetch: FetchLike = async (input, init) => {
    const url = new URL(input, "http://service.test");
    this.requestLog.push(`${init?.method ?? "GET"} ${url.pathname}${url.search}`);
    if (url.pathname === "/budget") {
      return json(this.budgetView());
    }
    if (url.pathname === "/heatmap") {
      const hour = Number(url.searchParams.get("hour"));
      if (!(hour >= 0 && hour <= 23)) {
        return json({ detail: `hour must be in [0, 23], got ${hour}` }, 400);
      }
      return json(this.heatmapPayload(hour));
    }
    if (url.pathname === "/query" && init?.method === "POST") {
      const body = JSON.parse(String(init.body)) as Record<string, unknown>;
      const hasFilter = ["regions", "bbox", "date_range", "hour_range"].some(
        (key) => body[key] != null,
      );
      if (!hasFilter) {
        return json({ detail: "query spec must carry at least one filter" }, 400);
      }
      const share = this.decayRatio * this.remainingEpsilon;
      if (share < this.epsilonMin) {
        return json(
          {
            detail: {
              error: `next allocation ${share} falls below epsilon_min ${this.epsilonMin}`,
              remaining_epsilon: this.remainingEpsilon,
              epsilon_min: this.epsilonMin,
            },
          },
          429,
        );
      }
      this.queryCounter += 1;
      this.allocations.push({
        query_id: `q-${String(this.queryCounter).padStart(4, "0")}`,
        epsilon: share,
        timestamp: 1700000000 + this.queryCounter,
      });
      this.noiseCounter += 1;
      const response: QueryResponse = {
        query_id: `q-${String(this.queryCounter).padStart(4, "0")}`,
        feature: "density_count",
        cells: [
          { region_id: "Oslo", hour: 17, value: 4200 + this.noiseCounter * 7 },
          { region_id: "Oslo", hour: 18, value: 3900 - this.noiseCounter * 3 },
        ],
        epsilon_charged: share,
        remaining_epsilon: this.remainingEpsilon,
      };
      return json(response);
    }
    return json({ detail: "not found" }, 404);
  };
}
