/** Board renderers: BoardState + API payloads in, HTML string out.
 *
 * Rendering is a pure function of its inputs so both boards can be tested
 * headlessly. Every displayed number is lifted verbatim from one API
 * response field; widgets carry data-widget attributes and raw values in
 * data-value attributes for traceability. */

import {
  barChartSvg,
  detectPeakHours,
  escapeXml,
  gaugeSvg,
  histogramSvg,
  lineOverlaySvg,
} from "./charts.js";
import type { BoardState } from "./state.js";
import type {
  CameraInfo,
  CompareResponse,
  FatalityResponse,
  FramesResponse,
  GvwResponse,
  ProfileResponse,
  ReliabilityResponse,
  SociabilitySummaryResponse,
  SpeedingResponse,
  WeeklyResponse,
} from "./types.js";

export interface MobilityData {
  weekly: WeeklyResponse | null;
  profiles: ProfileResponse[];
  reliability: ReliabilityResponse | null;
  speeding: SpeedingResponse | null;
  fatality: FatalityResponse | null;
  gvw: GvwResponse | null;
  compare: CompareResponse | null;
}

export interface SociabilityData {
  summary: SociabilitySummaryResponse | null;
  frames: FramesResponse | null;
  cameras: CameraInfo[];
}

const EMPTY_NOTE = `<p class="empty-note">no data for this selection</p>`;

function fmt(value: number | null | undefined, digits = 2): string {
  if (value === null || value === undefined) return "–";
  return value.toFixed(digits);
}

function pct(value: number | null | undefined): string {
  if (value === null || value === undefined) return "–";
  return `${value >= 0 ? "+" : ""}${value.toFixed(2)}%`;
}

function section(widget: string, title: string, body: string): string {
  return (
    `<section class="widget" data-widget="${widget}">` +
    `<h3>${escapeXml(title)}</h3>${body}</section>`
  );
}

function weeklySection(weekly: WeeklyResponse | null): string {
  if (!weekly || weekly.deltas.length === 0) {
    return section("weekly-deltas", "Weekly change vs baseline", EMPTY_NOTE);
  }
  if (weekly.deltas.every((d) => d.status !== "ok")) {
    return section("weekly-deltas", "Weekly change vs baseline", EMPTY_NOTE);
  }
  const chart = barChartSvg(
    weekly.deltas.map((d) => ({ label: d.week, value: d.pctChange })),
  );
  const rows = weekly.deltas
    .map((d) => {
      if (d.status !== "ok") {
        return (
          `<tr data-week="${d.week}" class="no-data"><td>${d.week}</td>` +
          `<td colspan="3">${d.status === "no_data" ? "no data" : "missing baseline"}</td></tr>`
        );
      }
      return (
        `<tr data-week="${d.week}"><td>${d.week}</td>` +
        `<td data-value="${d.pctChange}">${pct(d.pctChange)}</td>` +
        `<td data-value="${d.currentMean}">${fmt(d.currentMean, 0)}</td>` +
        `<td data-value="${d.baselineMean}">${fmt(d.baselineMean, 0)}</td></tr>`
      );
    })
    .join("");
  const table =
    `<table><thead><tr><th>week</th><th>change</th><th>current</th><th>baseline</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>`;
  return section("weekly-deltas", "Weekly change vs baseline", chart + table);
}

function profileSection(profiles: ProfileResponse[]): string {
  const withData = profiles.filter((p) => p.values.some((v) => v !== null));
  if (withData.length === 0) {
    return section("profile-overlay", "Critical-day hourly profiles", EMPTY_NOTE);
  }
  const chart = lineOverlaySvg(
    withData.map((p) => ({ label: p.day, values: p.values })),
  );
  const badges = withData
    .map((p) => {
      const peaks = detectPeakHours(p.values);
      const text = peaks.length
        ? `commute peaks at ${peaks.map((h) => `${String(h).padStart(2, "0")}h`).join(", ")}`
        : "no commute peaks";
      return (
        `<li data-day="${p.day}" data-peaks="${peaks.join(",")}">` +
        `${p.day}: ${text}</li>`
      );
    })
    .join("");
  return section(
    "profile-overlay",
    "Critical-day hourly profiles",
    chart + `<ul class="peak-badges">${badges}</ul>`,
  );
}

function reliabilitySection(r: ReliabilityResponse | null): string {
  if (!r) return section("reliability", "Travel-time reliability", EMPTY_NOTE);
  const body =
    r.stdDev === null
      ? `<p class="empty-note">fewer than two daytime samples</p>`
      : `<p class="readout"><span class="big" data-value="${r.stdDev}">${fmt(r.stdDev)}</span> min ` +
        `std dev over <span data-value="${r.n}">${r.n}</span> daytime samples ` +
        `(${r.daytimeWindow[0]}–${r.daytimeWindow[1]}h, mean <span data-value="${r.mean}">${fmt(r.mean)}</span> min)</p>`;
  return section("reliability", "Travel-time reliability", body);
}

function speedingSection(s: SpeedingResponse | null): string {
  if (!s || s.total === 0) {
    return section("speeding", "Segments over the speed limit", EMPTY_NOTE);
  }
  const body =
    gaugeSvg(s.share) +
    `<p class="readout"><span data-value="${s.over}">${s.over}</span> of ` +
    `<span data-value="${s.total}">${s.total}</span> segments over ` +
    `<span data-value="${s.limitMph}">${fmt(s.limitMph, 0)}</span> mph</p>`;
  return section("speeding", "Segments over the speed limit", body);
}

function fatalitySection(f: FatalityResponse | null): string {
  if (!f) return section("fatality", "Fatality rate", EMPTY_NOTE);
  const body = f.defined
    ? `<p class="readout"><span class="big" data-value="${f.ratePer1000}">${fmt(f.ratePer1000, 1)}</span> ` +
      `fatalities / 1000 crashes (<span data-value="${f.fatalities}">${fmt(f.fatalities, 0)}</span> of ` +
      `<span data-value="${f.crashes}">${fmt(f.crashes, 0)}</span>)</p>`
    : `<p class="empty-note">undefined: no crashes in this window</p>`;
  return section("fatality", "Fatality rate", body);
}

function gvwSection(g: GvwResponse | null): string {
  if (!g || g.histogram.total === 0) {
    return section("gvw", "Freight by gross vehicle weight", EMPTY_NOTE);
  }
  let body = histogramSvg(g.histogram.labels, g.histogram.counts);
  if (g.deltas) {
    const rows = g.deltas
      .map(
        (d) =>
          `<tr data-bin="${escapeXml(d.bin)}"><td>${escapeXml(d.bin)}</td>` +
          `<td data-value="${d.baseline}">${d.baseline}</td>` +
          `<td data-value="${d.current}">${d.current}</td>` +
          `<td data-value="${d.pctChange}">${pct(d.pctChange)}</td></tr>`,
      )
      .join("");
    body +=
      `<table><thead><tr><th>bin (kips)</th><th>baseline</th><th>current</th><th>change</th></tr></thead>` +
      `<tbody>${rows}</tbody></table>`;
  }
  return section("gvw", "Freight by gross vehicle weight", body);
}

function compareSection(c: CompareResponse | null): string {
  if (!c) return "";
  const body =
    `<p class="readout">` +
    `<span data-value="${c.left.value}">${fmt(c.left.value, 0)}</span> → ` +
    `<span data-value="${c.right.value}">${fmt(c.right.value, 0)}</span> ` +
    `(<span class="delta" data-value="${c.pctChange}">${pct(c.pctChange)}</span>, ${c.left.agg})` +
    `</p>` +
    `<p class="windows">${c.left.from.slice(0, 10)}…${c.left.to.slice(0, 10)} vs ` +
    `${c.right.from.slice(0, 10)}…${c.right.to.slice(0, 10)}</p>`;
  return section("scenario-compare", "Scenario comparison", body);
}

export function renderMobilityBoard(state: BoardState, data: MobilityData): string {
  return (
    `<div class="board mobility" data-board="mobility" data-city="${escapeXml(state.city)}">` +
    weeklySection(data.weekly) +
    profileSection(data.profiles) +
    reliabilitySection(data.reliability) +
    speedingSection(data.speeding) +
    fatalitySection(data.fatality) +
    gvwSection(data.gvw) +
    compareSection(data.compare) +
    `</div>`
  );
}

function cameraSelector(cameras: CameraInfo[], selected: string | undefined): string {
  const options = cameras
    .map(
      (cam) =>
        `<option value="${escapeXml(cam.camera)}"${cam.camera === selected ? " selected" : ""}>` +
        `${escapeXml(cam.camera)} (${cam.frames} frames)</option>`,
    )
    .join("");
  return (
    `<label class="camera-picker">camera ` +
    `<select data-role="camera-select">${options}</select></label>`
  );
}

export function renderSociabilityBoard(state: BoardState, data: SociabilityData): string {
  const camera = state.locations[0];
  const header = cameraSelector(data.cameras, camera);

  let summaryBody: string;
  const s = data.summary;
  if (!s || s.frames === 0) {
    summaryBody = EMPTY_NOTE;
  } else {
    summaryBody =
      `<dl class="stats">` +
      `<dt>avg density</dt><dd data-value="${s.avgPedsDensity}">${fmt(s.avgPedsDensity, 1)} /frame</dd>` +
      `<dt>max density</dt><dd data-value="${s.maxPedsDensity}">${fmt(s.maxPedsDensity, 0)} /frame</dd>` +
      `<dt>compliance</dt><dd data-value="${s.complianceRate}">${
        s.complianceRate === null ? "–" : `${(s.complianceRate * 100).toFixed(0)}%`
      }</dd>` +
      `<dt>violated pairs</dt><dd data-value="${s.totalViolatedPairs}">${s.totalViolatedPairs}</dd>` +
      `</dl>`;
  }

  let seriesBody = EMPTY_NOTE;
  if (data.frames && data.frames.frames.length > 0) {
    const densities = data.frames.frames.map((f) => f.personCount as number | null);
    const compliance = data.frames.frames.map((f) =>
      f.complianceRate === null ? null : f.complianceRate * 100,
    );
    seriesBody =
      `<h4>pedestrians per frame</h4>` +
      lineOverlaySvg([{ label: "density", values: densities }], { height: 160 }) +
      `<h4>compliance per frame (%)</h4>` +
      lineOverlaySvg([{ label: "compliance", values: compliance }], { height: 160 });
  }

  return (
    `<div class="board sociability" data-board="sociability" data-city="${escapeXml(state.city)}">` +
    header +
    section("sociability-summary", "Social distancing summary", summaryBody) +
    section("density-series", "Per-frame series", seriesBody) +
    `</div>`
  );
}
