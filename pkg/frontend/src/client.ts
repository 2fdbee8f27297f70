/** Typed client for the /v1 API. Fetching is injectable so tests can run
 * against recorded fixture bodies without a server. */

import type {
  ApiErrorBody,
  CitiesResponse,
  CompareResponse,
  FatalityResponse,
  FramesResponse,
  GvwResponse,
  HealthResponse,
  ProfileResponse,
  ReliabilityResponse,
  SociabilitySummaryResponse,
  SpeedingResponse,
  WeeklyResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

export type FetchJson = (url: string) => Promise<unknown>;

function defaultFetchJson(url: string): Promise<unknown> {
  return fetch(url).then(async (resp) => {
    const body = (await resp.json()) as unknown;
    if (!resp.ok) {
      const err = body as ApiErrorBody;
      throw new ApiError(resp.status, err.error?.code ?? "internal", err.error?.message ?? "request failed");
    }
    return body;
  });
}

type Params = Record<string, string | number | undefined>;

export function buildQuery(params: Params): string {
  const parts: string[] = [];
  for (const key of Object.keys(params)) {
    const value = params[key];
    if (value === undefined || value === "") continue;
    parts.push(`${encodeURIComponent(key)}=${encodeURIComponent(String(value))}`);
  }
  return parts.join("&");
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchJson: FetchJson = defaultFetchJson,
  ) {}

  private get<T>(path: string, params: Params = {}): Promise<T> {
    const query = buildQuery(params);
    const url = `${this.baseUrl}${path}${query ? `?${query}` : ""}`;
    return this.fetchJson(url) as Promise<T>;
  }

  health(): Promise<HealthResponse> {
    return this.get("/healthz");
  }

  cities(): Promise<CitiesResponse> {
    return this.get("/v1/cities");
  }

  weekly(q: {
    city: string;
    metric: string;
    location: string;
    weeks: string[];
    baseline?: string;
    agg?: "sum" | "mean";
  }): Promise<WeeklyResponse> {
    return this.get("/v1/metrics/weekly", {
      city: q.city,
      metric: q.metric,
      location: q.location,
      weeks: q.weeks.join(","),
      baseline: q.baseline,
      agg: q.agg,
    });
  }

  profile(q: { city: string; metric: string; location: string; day: string }): Promise<ProfileResponse> {
    return this.get("/v1/metrics/profile", q);
  }

  reliability(q: {
    city: string;
    location: string;
    from: string;
    to: string;
    dayStart?: number;
    dayEnd?: number;
  }): Promise<ReliabilityResponse> {
    return this.get("/v1/metrics/reliability", q);
  }

  speeding(q: { city: string; from: string; to: string; limit?: number }): Promise<SpeedingResponse> {
    return this.get("/v1/metrics/speeding", q);
  }

  fatalityRate(q: { city: string; from: string; to: string }): Promise<FatalityResponse> {
    return this.get("/v1/metrics/fatality-rate", q);
  }

  gvw(q: {
    city: string;
    location: string;
    from: string;
    to: string;
    baselineFrom?: string;
    baselineTo?: string;
  }): Promise<GvwResponse> {
    return this.get("/v1/metrics/gvw", q);
  }

  sociabilitySummary(q: { city: string; camera: string; from: string; to: string }): Promise<SociabilitySummaryResponse> {
    return this.get("/v1/sociability/summary", q);
  }

  sociabilityFrames(q: {
    city: string;
    camera: string;
    from: string;
    to: string;
    limit?: number;
    cursor?: string;
  }): Promise<FramesResponse> {
    return this.get("/v1/sociability/frames", q);
  }

  compare(q: {
    city: string;
    metric: string;
    location: string;
    leftFrom: string;
    leftTo: string;
    rightFrom: string;
    rightTo: string;
    agg?: "sum" | "mean";
  }): Promise<CompareResponse> {
    return this.get("/v1/compare", q);
  }
}
