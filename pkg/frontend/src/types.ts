/** Response shapes of the /v1 JSON API. The dashboard never computes
 * metrics client-side; these types are the single source of numbers. */

export interface SeriesInfo {
  city: string;
  metric: string;
  location: string;
  count: number;
  tmin: string;
  tmax: string;
}

export interface CameraInfo {
  city: string;
  camera: string;
  frames: number;
  tmin: string;
  tmax: string;
}

export interface CityEntry {
  city: string;
  metrics: SeriesInfo[];
  cameras: CameraInfo[];
}

export interface CitiesResponse {
  cities: CityEntry[];
}

export type WeeklyStatus = "ok" | "no_data" | "missing_baseline";

export interface WeeklyDelta {
  week: string;
  status: WeeklyStatus;
  currentMean: number | null;
  baselineMean: number | null;
  pctChange: number | null;
  sampleCounts: { current: number; baseline: number };
}

export interface WeeklyResponse {
  city: string;
  metric: string;
  location: string;
  baseline: { mode: string; referenceWeek?: string };
  deltas: WeeklyDelta[];
}

export interface ProfileResponse {
  city: string;
  metric: string;
  location: string;
  day: string;
  values: (number | null)[];
  sampleCounts: number[];
}

export interface ReliabilityResponse {
  city: string;
  location: string;
  from: string;
  to: string;
  daytimeWindow: [number, number];
  stdDev: number | null;
  mean: number | null;
  n: number;
}

export interface SpeedingResponse {
  city: string;
  from: string;
  to: string;
  share: number | null;
  over: number;
  total: number;
  limitMph: number;
  perSegment: Record<string, number>;
  noData: string[];
}

export interface FatalityResponse {
  city: string;
  from: string;
  to: string;
  ratePer1000: number | null;
  defined: boolean;
  fatalities: number;
  crashes: number;
}

export interface GvwHistogram {
  edges: number[];
  labels: string[];
  counts: number[];
  total: number;
}

export interface GvwDelta {
  bin: string;
  current: number;
  baseline: number;
  pctChange: number | null;
}

export interface GvwResponse {
  city: string;
  location: string;
  from: string;
  to: string;
  histogram: GvwHistogram;
  deltas: GvwDelta[] | null;
  baselineFrom?: string;
  baselineTo?: string;
}

export interface SociabilitySummaryResponse {
  city: string;
  camera: string;
  from: string;
  to: string;
  frames: number;
  avgPedsDensity: number | null;
  maxPedsDensity: number | null;
  complianceRate: number | null;
  totalViolatedPairs: number;
}

export interface FrameResult {
  camera: string;
  capturedAt: string;
  personCount: number;
  countsByClass: Record<string, number>;
  violatedPairs: number;
  violatingPersons: number;
  complianceRate: number | null;
  degenerateBoxes: number;
}

export interface FramesResponse {
  city: string;
  camera: string;
  from: string;
  to: string;
  total: number;
  frames: FrameResult[];
  nextCursor: string | null;
}

export interface WindowAggregate {
  from: string;
  to: string;
  agg: string;
  value: number | null;
  n: number;
}

export interface CompareResponse {
  city: string;
  metric: string;
  location: string;
  left: WindowAggregate;
  right: WindowAggregate;
  pctChange: number | null;
}

export interface HealthResponse {
  status: string;
  version: string;
  warehouseHighWater: string;
}

export interface ApiErrorBody {
  error: { code: string; message: string; details?: Record<string, unknown> };
}
