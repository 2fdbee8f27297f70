import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, buildQuery } from "../src/client.js";
import type { WeeklyResponse } from "../src/types.js";

import weeklyFixture from "./fixtures/weekly_volume.json";

function capturingClient(body: unknown): { client: ApiClient; urls: string[] } {
  const urls: string[] = [];
  const client = new ApiClient("http://api.test", (url) => {
    urls.push(url);
    return Promise.resolve(body);
  });
  return { client, urls };
}

describe("query building", () => {
  it("drops undefined and empty parameters", () => {
    expect(buildQuery({ a: "1", b: undefined, c: "", d: "x y" })).toBe("a=1&d=x%20y");
  });
});

describe("typed client", () => {
  it("builds the weekly request the API documents", async () => {
    const { client, urls } = capturingClient(weeklyFixture);
    const result = await client.weekly({
      city: "seattle",
      metric: "traffic_volume",
      location: "i5_downtown",
      weeks: ["2020-03-30", "2020-04-13"],
      baseline: "prior_year",
      agg: "sum",
    });
    expect(urls[0]).toBe(
      "http://api.test/v1/metrics/weekly?city=seattle&metric=traffic_volume" +
        "&location=i5_downtown&weeks=2020-03-30%2C2020-04-13&baseline=prior_year&agg=sum",
    );
    const typed: WeeklyResponse = result;
    expect(typed.deltas[0]?.pctChange).toBe(-46.91);
  });

  it("builds the fixed-reference baseline form", async () => {
    const { client, urls } = capturingClient(weeklyFixture);
    await client.weekly({
      city: "seattle",
      metric: "travel_time",
      location: "i5_downtown",
      weeks: ["2020-04-27"],
      baseline: "ref:2020-02-24",
    });
    expect(urls[0]).toContain("baseline=ref%3A2020-02-24");
    expect(urls[0]).not.toContain("agg=");
  });

  it("builds pagination parameters for the frames endpoint", async () => {
    const { client, urls } = capturingClient({ frames: [], nextCursor: null });
    await client.sociabilityFrames({
      city: "seattle",
      camera: "bwy_epike",
      from: "2020-05-18",
      to: "2020-05-19",
      limit: 17,
      cursor: "34",
    });
    expect(urls[0]).toContain("limit=17");
    expect(urls[0]).toContain("cursor=34");
  });

  it("surfaces API error bodies as typed errors", async () => {
    const client = new ApiClient("http://api.test", () =>
      Promise.reject(new ApiError(400, "bad_request", "missing required parameter 'city'")),
    );
    await expect(client.cities()).rejects.toMatchObject({
      status: 400,
      code: "bad_request",
    });
  });
});
