/** Markup builders. Pure string generation so every surface is testable. */

import { colorFor } from "./color.js";
import { project, type Viewport } from "./projection.js";
import type { ViewState } from "./state.js";
import type { HeatmapPayload } from "./types.js";

const MAP_VIEWPORT: Viewport = { width: 420, height: 520, padding: 16 };

function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderMapSvg(payload: HeatmapPayload): string {
  const circles = payload.entries
    .map((entry) => {
      const { x, y } = project(entry.latitude, entry.longitude, MAP_VIEWPORT);
      const radius = 4 + entry.intensity * 10;
      const tooltip = escapeXml(
        `${entry.region_id}: ~${entry.noisy_count} vehicles (eps=${payload.epsilon})`,
      );
      return (
        `<circle cx="${x.toFixed(1)}" cy="${y.toFixed(1)}" r="${radius.toFixed(1)}" ` +
        `fill="${colorFor(entry.intensity)}" fill-opacity="0.85" stroke="#1f2937" ` +
        `stroke-width="0.5" data-region="${escapeXml(entry.region_id)}" ` +
        `data-intensity="${entry.intensity}"><title>${tooltip}</title></circle>`
      );
    })
    .join("");
  return (
    `<svg viewBox="0 0 ${MAP_VIEWPORT.width} ${MAP_VIEWPORT.height}" ` +
    `xmlns="http://www.w3.org/2000/svg" role="img" aria-label="traffic heatmap">` +
    `<rect width="100%" height="100%" fill="#f8fafc"/>${circles}</svg>`
  );
}

export function renderGauge(state: ViewState): string {
  if (state.remainingBudget === null) {
    return `<div class="gauge" data-remaining="">budget: syncing...</div>`;
  }
  const total = state.totalBudget ?? state.remainingBudget;
  const fraction = total > 0 ? Math.max(0, Math.min(1, state.remainingBudget / total)) : 0;
  const label = state.budgetExhausted
    ? "budget exhausted"
    : `remaining ε = ${state.remainingBudget.toFixed(4)}`;
  return (
    `<div class="gauge" data-remaining="${state.remainingBudget}">` +
    `<div class="gauge-bar" style="width:${(fraction * 100).toFixed(1)}%"></div>` +
    `<span>${label}</span></div>`
  );
}

export function renderHistory(state: ViewState): string {
  if (state.history.length === 0) {
    return `<p class="history-empty">no queries yet</p>`;
  }
  const items = state.history
    .map(
      (entry) =>
        `<li><code>${escapeXml(entry.summary)}</code>` +
        ` charged ε=${entry.epsilonCharged.toFixed(4)}</li>`,
    )
    .join("");
  return `<ol class="history">${items}</ol>`;
}

export function renderBanner(state: ViewState): string {
  if (!state.banner) {
    return "";
  }
  return `<div class="banner" role="alert">${escapeXml(state.banner)}</div>`;
}

export function renderSubmitDisabled(state: ViewState): boolean {
  return state.queryInFlight || state.budgetExhausted;
}
