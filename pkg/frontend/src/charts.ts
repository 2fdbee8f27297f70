/** Hand-rolled SVG chart builders.
 *
 * Every function returns an SVG string built purely from its inputs, so
 * chart rendering is testable in Node with no DOM. Numbers are rendered
 * verbatim from the API (display rounding only). */

const PALETTE = ["#2563eb", "#dc2626", "#059669", "#d97706", "#7c3aed", "#0891b2"];

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export interface OverlaySeries {
  label: string;
  values: (number | null)[];
}

/** Hours that stand out as peaks: local maxima rising at least
 * `minProminence` of the series range above the series minimum. A flat
 * series has no peaks. */
export function detectPeakHours(values: (number | null)[], minProminence = 0.5): number[] {
  const present = values.filter((v): v is number => v !== null);
  if (present.length < 3) return [];
  const lo = Math.min(...present);
  const hi = Math.max(...present);
  const range = hi - lo;
  if (range <= 0) return [];
  const peaks: number[] = [];
  for (let h = 0; h < values.length; h++) {
    const v = values[h];
    if (v === null || v === undefined) continue;
    const left = h > 0 ? values[h - 1] : null;
    const right = h < values.length - 1 ? values[h + 1] : null;
    const leftOk = left === null || left === undefined || v > left;
    const rightOk = right === null || right === undefined || v >= right;
    if (leftOk && rightOk && v - lo >= minProminence * range) {
      peaks.push(h);
    }
  }
  return peaks;
}

function scale(v: number, lo: number, hi: number, outLo: number, outHi: number): number {
  if (hi === lo) return (outLo + outHi) / 2;
  return outLo + ((v - lo) / (hi - lo)) * (outHi - outLo);
}

function round2(v: number): number {
  return Math.round(v * 100) / 100;
}

/** Multi-series hourly overlay (the critical-day chart): one polyline per
 * day on a shared 0-23h axis, with peak hours marked per series. */
export function lineOverlaySvg(
  series: OverlaySeries[],
  opts: { width?: number; height?: number; unit?: string } = {},
): string {
  const width = opts.width ?? 640;
  const height = opts.height ?? 240;
  const pad = 32;
  const all = series.flatMap((s) => s.values).filter((v): v is number => v !== null);
  const lo = all.length ? Math.min(...all, 0) : 0;
  const hi = all.length ? Math.max(...all) : 1;
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" class="chart overlay" role="img">`,
  );
  parts.push(
    `<line x1="${pad}" y1="${height - pad}" x2="${width - 8}" y2="${height - pad}" class="axis"/>`,
  );
  series.forEach((s, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    const n = s.values.length;
    // polylines break where values are absent
    let run: string[] = [];
    const segments: string[][] = [];
    s.values.forEach((v, h) => {
      if (v === null) {
        if (run.length) segments.push(run);
        run = [];
        return;
      }
      const x = scale(h, 0, Math.max(n - 1, 1), pad, width - 8);
      const y = scale(v, lo, hi, height - pad, 8);
      run.push(`${round2(x)},${round2(y)}`);
    });
    if (run.length) segments.push(run);
    for (const segment of segments) {
      parts.push(
        `<polyline data-series="${escapeXml(s.label)}" fill="none" stroke="${color}" ` +
          `stroke-width="2" points="${segment.join(" ")}"/>`,
      );
    }
    for (const hour of detectPeakHours(s.values)) {
      const v = s.values[hour];
      if (v === null || v === undefined) continue;
      const x = scale(hour, 0, Math.max(n - 1, 1), pad, width - 8);
      const y = scale(v, lo, hi, height - pad, 8);
      parts.push(
        `<circle data-peak-series="${escapeXml(s.label)}" data-peak-hour="${hour}" ` +
          `cx="${round2(x)}" cy="${round2(y)}" r="4" fill="${color}"/>`,
      );
    }
  });
  parts.push("</svg>");
  return parts.join("");
}

/** Signed bar chart (weekly percent changes): bars grow down for negative
 * values from a zero line. Missing values render as hatched placeholders. */
export function barChartSvg(
  items: { label: string; value: number | null }[],
  opts: { width?: number; height?: number } = {},
): string {
  const width = opts.width ?? 640;
  const height = opts.height ?? 200;
  const pad = 28;
  const values = items.map((i) => i.value).filter((v): v is number => v !== null);
  const lo = Math.min(0, ...values);
  const hi = Math.max(0, ...values);
  const zeroY = scale(0, lo, hi, height - pad, 8);
  const band = (width - pad - 8) / Math.max(items.length, 1);
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" class="chart bars" role="img">`,
    `<line x1="${pad}" y1="${round2(zeroY)}" x2="${width - 8}" y2="${round2(zeroY)}" class="axis"/>`,
  ];
  items.forEach((item, idx) => {
    const x = pad + idx * band + band * 0.15;
    const w = band * 0.7;
    if (item.value === null) {
      parts.push(
        `<rect data-bar="${escapeXml(item.label)}" data-missing="true" x="${round2(x)}" ` +
          `y="8" width="${round2(w)}" height="${round2(height - pad - 8)}" class="missing"/>`,
      );
      return;
    }
    const y = scale(item.value, lo, hi, height - pad, 8);
    const top = Math.min(y, zeroY);
    const h = Math.abs(y - zeroY);
    const cls = item.value < 0 ? "neg" : "pos";
    parts.push(
      `<rect data-bar="${escapeXml(item.label)}" data-value="${item.value}" x="${round2(x)}" ` +
        `y="${round2(top)}" width="${round2(w)}" height="${round2(Math.max(h, 1))}" class="${cls}"/>`,
    );
  });
  parts.push("</svg>");
  return parts.join("");
}

export function histogramSvg(
  labels: string[],
  counts: number[],
  opts: { width?: number; height?: number } = {},
): string {
  const width = opts.width ?? 420;
  const height = opts.height ?? 180;
  const pad = 24;
  const hi = Math.max(1, ...counts);
  const band = (width - pad - 8) / Math.max(labels.length, 1);
  const parts = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" class="chart histogram" role="img">`,
  ];
  labels.forEach((label, idx) => {
    const count = counts[idx] ?? 0;
    const h = scale(count, 0, hi, 0, height - pad - 8);
    const x = pad + idx * band + band * 0.15;
    parts.push(
      `<rect data-bin="${escapeXml(label)}" data-count="${count}" x="${round2(x)}" ` +
        `y="${round2(height - pad - h)}" width="${round2(band * 0.7)}" height="${round2(h)}"/>`,
      `<text x="${round2(x + band * 0.35)}" y="${height - 8}" text-anchor="middle" class="bin-label">${escapeXml(label)}</text>`,
    );
  });
  parts.push("</svg>");
  return parts.join("");
}

/** Share gauge: a horizontal meter with the filled fraction. */
export function gaugeSvg(fraction: number | null, opts: { width?: number } = {}): string {
  const width = opts.width ?? 320;
  const height = 56;
  if (fraction === null) {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" class="chart gauge" role="img">` +
      `<text x="8" y="32" class="empty-note">no data</text></svg>`
    );
  }
  const clamped = Math.max(0, Math.min(1, fraction));
  const filled = round2(clamped * (width - 16));
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" class="chart gauge" role="img">` +
    `<rect x="8" y="20" width="${width - 16}" height="16" class="track"/>` +
    `<rect x="8" y="20" width="${filled}" height="16" class="fill" data-fraction="${fraction}"/>` +
    `<text x="8" y="14" class="gauge-label">${round2(clamped * 100)}%</text>` +
    `</svg>`
  );
}
