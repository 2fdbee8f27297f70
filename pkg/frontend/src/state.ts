/** Board state and its URL encoding.
 *
 * The full view state lives in the query string so any board can be shared
 * by copying the address bar; decode(encode(state)) must reproduce the
 * state exactly (asserted by tests). No cookies, no storage. */

export type BoardKind = "mobility" | "sociability";

export interface BoardState {
  board: BoardKind;
  city: string;
  /** Selected metric (mobility) — ignored by the sociability board. */
  metric: string;
  /** Selected locations: series locations, or [camera] on sociability. */
  locations: string[];
  /** Primary analysis range, inclusive start / exclusive end. */
  from: string;
  to: string;
  /** Optional second range for scenario comparison. */
  compareFrom?: string;
  compareTo?: string;
  /** prior_year | ref:YYYY-MM-DD */
  baseline: string;
  /** Calendar days overlaid on the critical-day profile chart. */
  profileDays: string[];
}

export const DEFAULT_STATE: BoardState = {
  board: "mobility",
  city: "seattle",
  metric: "traffic_volume",
  locations: ["i5_downtown"],
  from: "2020-03-30",
  to: "2020-05-18",
  baseline: "prior_year",
  profileDays: ["2020-02-28", "2020-03-24", "2020-04-14"],
};

const LIST_SEP = ",";

export function encodeBoardState(state: BoardState): string {
  const pairs: [string, string][] = [
    ["board", state.board],
    ["city", state.city],
    ["metric", state.metric],
    ["locations", state.locations.join(LIST_SEP)],
    ["from", state.from],
    ["to", state.to],
    ["baseline", state.baseline],
    ["days", state.profileDays.join(LIST_SEP)],
  ];
  if (state.compareFrom !== undefined) pairs.push(["cmpFrom", state.compareFrom]);
  if (state.compareTo !== undefined) pairs.push(["cmpTo", state.compareTo]);
  return pairs.map(([k, v]) => `${k}=${encodeURIComponent(v)}`).join("&");
}

function splitList(raw: string | null): string[] | undefined {
  if (raw === null) return undefined;
  if (raw === "") return [];
  return raw.split(LIST_SEP);
}

export function decodeBoardState(query: string): BoardState {
  const params = new URLSearchParams(query.startsWith("?") ? query.slice(1) : query);
  const board = params.get("board");
  const state: BoardState = {
    board: board === "sociability" ? "sociability" : "mobility",
    city: params.get("city") ?? DEFAULT_STATE.city,
    metric: params.get("metric") ?? DEFAULT_STATE.metric,
    locations: splitList(params.get("locations")) ?? [...DEFAULT_STATE.locations],
    from: params.get("from") ?? DEFAULT_STATE.from,
    to: params.get("to") ?? DEFAULT_STATE.to,
    baseline: params.get("baseline") ?? DEFAULT_STATE.baseline,
    profileDays: splitList(params.get("days")) ?? [...DEFAULT_STATE.profileDays],
  };
  const cmpFrom = params.get("cmpFrom");
  const cmpTo = params.get("cmpTo");
  if (cmpFrom !== null) state.compareFrom = cmpFrom;
  if (cmpTo !== null) state.compareTo = cmpTo;
  return state;
}

/** Mondays (ISO dates) covering [from, to); drives the weekly-delta chart. */
export function mondaysInRange(from: string, to: string): string[] {
  const start = new Date(`${from}T00:00:00Z`);
  const end = new Date(`${to}T00:00:00Z`);
  if (Number.isNaN(start.getTime()) || Number.isNaN(end.getTime())) return [];
  const monday = new Date(start);
  const shift = (monday.getUTCDay() + 6) % 7; // days since Monday
  monday.setUTCDate(monday.getUTCDate() - shift);
  // the Monday of the week containing `from` is included even if it
  // precedes `from`: weeks are whole units on the chart
  const out: string[] = [];
  for (let d = new Date(monday); d < end; d.setUTCDate(d.getUTCDate() + 7)) {
    out.push(d.toISOString().slice(0, 10));
    if (out.length > 104) break; // two years of weeks is plenty for one chart
  }
  return out;
}
