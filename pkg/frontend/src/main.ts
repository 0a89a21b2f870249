/** DOM wiring for the analyst console. Logic lives in controller/state/render. */

import { ApiClient } from "./api.js";
import { SessionController } from "./controller.js";
import { renderBanner, renderGauge, renderHistory, renderMapSvg, renderSubmitDisabled } from "./render.js";
import type { QueryRequest } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

export function bootstrap(baseUrl = ""): SessionController {
  const api = new ApiClient(baseUrl);
  const controller = new SessionController(api);

  const map = el<HTMLDivElement>("map");
  const gauge = el<HTMLDivElement>("gauge");
  const history = el<HTMLDivElement>("history");
  const banner = el<HTMLDivElement>("banner");
  const hourSlider = el<HTMLInputElement>("hour-slider");
  const hourLabel = el<HTMLSpanElement>("hour-label");
  const form = el<HTMLFormElement>("query-form");
  const regionsInput = el<HTMLInputElement>("regions-input");
  const hourFrom = el<HTMLInputElement>("hour-from");
  const hourTo = el<HTMLInputElement>("hour-to");
  const submit = el<HTMLButtonElement>("submit-query");
  const validation = el<HTMLSpanElement>("form-validation");

  controller.subscribe((state) => {
    if (state.heatmap) {
      map.innerHTML = renderMapSvg(state.heatmap);
    }
    gauge.innerHTML = renderGauge(state);
    history.innerHTML = renderHistory(state);
    banner.innerHTML = renderBanner(state);
    submit.disabled = renderSubmitDisabled(state);
    hourLabel.textContent = `${String(state.hour).padStart(2, "0")}:00`;
  });

  hourSlider.addEventListener("input", () => {
    void controller.loadHeatmap(Number(hourSlider.value));
  });

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const regions = regionsInput.value
      .split(",")
      .map((r) => r.trim())
      .filter((r) => r.length > 0);
    const from = Number(hourFrom.value);
    const to = Number(hourTo.value);
    const request: QueryRequest = { feature: "density_count" };
    if (regions.length > 0) {
      request.regions = regions;
    }
    if (!Number.isNaN(from) && !Number.isNaN(to)) {
      request.hour_range = [from, to];
    }
    if (!request.regions && !request.hour_range) {
      validation.textContent = "add at least one filter (regions or an hour range)";
      return;
    }
    validation.textContent = "";
    void controller.submitQuery(request);
  });

  void controller.start();
  return controller;
}

declare global {
  interface Window {
    fairtrafficConsole?: SessionController;
  }
}

if (typeof document !== "undefined" && document.getElementById("map")) {
  window.fairtrafficConsole = bootstrap();
}
