/** Browser bootstrap: URL → state → fetch → render, with polling.
 *
 * The API base URL comes from runtime config (window.CITYPULSE_API_BASE or
 * a <meta name="citypulse-api"> tag), so one static bundle serves any
 * deployment. Stale responses are discarded via a request sequence token;
 * the boards re-render only from the newest snapshot. */

import { ApiClient } from "./client.js";
import { renderMobilityBoard, renderSociabilityBoard } from "./boards.js";
import type { MobilityData, SociabilityData } from "./boards.js";
import {
  DEFAULT_STATE,
  decodeBoardState,
  encodeBoardState,
  mondaysInRange,
  type BoardState,
} from "./state.js";
import type { CitiesResponse } from "./types.js";

const POLL_MS = 60_000;

declare global {
  interface Window {
    CITYPULSE_API_BASE?: string;
  }
}

function apiBase(): string {
  if (window.CITYPULSE_API_BASE) return window.CITYPULSE_API_BASE;
  const meta = document.querySelector('meta[name="citypulse-api"]');
  return meta?.getAttribute("content") ?? "";
}

async function fetchMobility(client: ApiClient, state: BoardState): Promise<MobilityData> {
  const location = state.locations[0] ?? "";
  const weeks = mondaysInRange(state.from, state.to);
  const compare =
    state.compareFrom && state.compareTo
      ? client.compare({
          city: state.city,
          metric: state.metric,
          location,
          leftFrom: state.from,
          leftTo: state.to,
          rightFrom: state.compareFrom,
          rightTo: state.compareTo,
        })
      : Promise.resolve(null);
  const [weekly, profiles, reliability, speeding, fatality, gvw, cmp] = await Promise.all([
    client
      .weekly({
        city: state.city,
        metric: state.metric,
        location,
        weeks,
        baseline: state.baseline,
      })
      .catch(() => null),
    Promise.all(
      state.profileDays.map((day) =>
        client
          .profile({ city: state.city, metric: "travel_time", location: "i5_greenlake", day })
          .catch(() => null),
      ),
    ),
    client
      .reliability({ city: state.city, location, from: state.from, to: state.to })
      .catch(() => null),
    client.speeding({ city: state.city, from: state.from, to: state.to }).catch(() => null),
    client.fatalityRate({ city: state.city, from: state.from, to: state.to }).catch(() => null),
    client
      .gvw({ city: state.city, location, from: state.from, to: state.to })
      .catch(() => null),
    compare.catch(() => null),
  ]);
  return {
    weekly,
    profiles: profiles.filter((p): p is NonNullable<typeof p> => p !== null),
    reliability,
    speeding,
    fatality,
    gvw,
    compare: cmp,
  };
}

async function fetchSociability(
  client: ApiClient,
  state: BoardState,
  cities: CitiesResponse | null,
): Promise<SociabilityData> {
  const cameras =
    cities?.cities.find((c) => c.city === state.city)?.cameras ?? [];
  const camera = state.locations[0] ?? cameras[0]?.camera ?? "";
  const [summary, frames] = await Promise.all([
    client
      .sociabilitySummary({ city: state.city, camera, from: state.from, to: state.to })
      .catch(() => null),
    client
      .sociabilityFrames({
        city: state.city,
        camera,
        from: state.from,
        to: state.to,
        limit: 1000,
      })
      .catch(() => null),
  ]);
  return { summary, frames, cameras };
}

export function start(root: HTMLElement): void {
  const client = new ApiClient(apiBase());
  let state = decodeBoardState(window.location.search || encodeBoardState(DEFAULT_STATE));
  let cities: CitiesResponse | null = null;
  let requestSeq = 0;

  async function refresh(): Promise<void> {
    const seq = ++requestSeq;
    if (!cities) cities = await client.cities().catch(() => null);
    const html =
      state.board === "mobility"
        ? renderMobilityBoard(state, await fetchMobility(client, state))
        : renderSociabilityBoard(state, await fetchSociability(client, state, cities));
    if (seq !== requestSeq) return; // a newer request superseded this one
    root.innerHTML = renderShell(state) + html;
    wire();
  }

  function renderShell(s: BoardState): string {
    const tab = (kind: BoardState["board"], label: string) =>
      `<button data-tab="${kind}"${s.board === kind ? ' class="active"' : ""}>${label}</button>`;
    const cityOptions = (cities?.cities ?? [{ city: s.city, metrics: [], cameras: [] }])
      .map(
        (c) =>
          `<option value="${c.city}"${c.city === s.city ? " selected" : ""}>${c.city}</option>`,
      )
      .join("");
    return (
      `<nav class="topbar">${tab("mobility", "Mobility board")}${tab("sociability", "Sociability board")}` +
      `<label>city <select data-role="city-select">${cityOptions}</select></label>` +
      `<span class="range">${state.from} → ${state.to}</span></nav>`
    );
  }

  function update(next: Partial<BoardState>): void {
    state = { ...state, ...next };
    window.history.pushState(null, "", `?${encodeBoardState(state)}`);
    void refresh();
  }

  function wire(): void {
    root.querySelectorAll<HTMLButtonElement>("button[data-tab]").forEach((btn) => {
      btn.addEventListener("click", () =>
        update({ board: btn.dataset.tab as BoardState["board"] }),
      );
    });
    const citySelect = root.querySelector<HTMLSelectElement>('select[data-role="city-select"]');
    citySelect?.addEventListener("change", () => {
      // switching city resets the location picker to that city's catalog
      const entry = cities?.cities.find((c) => c.city === citySelect.value);
      const fallback =
        state.board === "sociability"
          ? entry?.cameras[0]?.camera
          : entry?.metrics[0]?.location;
      update({ city: citySelect.value, locations: fallback ? [fallback] : [] });
    });
    const cameraSelect = root.querySelector<HTMLSelectElement>('select[data-role="camera-select"]');
    cameraSelect?.addEventListener("change", () => update({ locations: [cameraSelect.value] }));
  }

  window.addEventListener("popstate", () => {
    state = decodeBoardState(window.location.search);
    void refresh();
  });

  void refresh();
  window.setInterval(() => void refresh(), POLL_MS);
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  start(document.getElementById("app") as HTMLElement);
}
