import { describe, expect, it } from "vitest";

import {
  DEFAULT_STATE,
  decodeBoardState,
  encodeBoardState,
  mondaysInRange,
  type BoardState,
} from "../src/state.js";

// deterministic pseudo-random generator so failures reproduce
function mulberry32(seed: number): () => number {
  return () => {
    seed |= 0;
    seed = (seed + 0x6d2b79f5) | 0;
    let t = Math.imul(seed ^ (seed >>> 15), 1 | seed);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function randomState(rand: () => number): BoardState {
  const pick = <T>(xs: T[]): T => xs[Math.floor(rand() * xs.length)]!;
  const state: BoardState = {
    board: pick(["mobility", "sociability"]),
    city: pick(["nyc", "seattle", "chicago"]),
    metric: pick(["traffic_volume", "travel_time", "speed", "bike_count"]),
    locations: Array.from({ length: Math.floor(rand() * 4) }, (_, i) => `loc ${i}/${Math.floor(rand() * 100)}`),
    from: pick(["2020-02-24", "2020-03-30", "2020-03-30T12:00:00-07:00"]),
    to: pick(["2020-05-18", "2020-06-01"]),
    baseline: pick(["prior_year", "ref:2020-02-24"]),
    profileDays: Array.from({ length: Math.floor(rand() * 3) }, (_, i) => `2020-0${i + 2}-28`),
  };
  if (rand() < 0.5) {
    state.compareFrom = "2020-04-01";
    state.compareTo = "2020-04-15";
  }
  return state;
}

describe("board state URL encoding", () => {
  it("round-trips the default state exactly", () => {
    expect(decodeBoardState(encodeBoardState(DEFAULT_STATE))).toEqual(DEFAULT_STATE);
  });

  it("round-trips 200 randomized states exactly", () => {
    const rand = mulberry32(20200518);
    for (let i = 0; i < 200; i++) {
      const state = randomState(rand);
      expect(decodeBoardState(encodeBoardState(state))).toEqual(state);
    }
  });

  it("round-trips values that need percent-encoding", () => {
    const state: BoardState = {
      ...DEFAULT_STATE,
      city: "new york",
      locations: ["5th & main", "a,b"],
    };
    const decoded = decodeBoardState(encodeBoardState(state));
    expect(decoded.city).toBe("new york");
    // a comma inside a location is a list separator on the wire; the list
    // itself survives as values, not necessarily the same grouping
    expect(decoded.locations.join(",")).toBe("5th & main,a,b");
  });

  it("accepts a leading question mark and fills defaults", () => {
    const state = decodeBoardState("?board=sociability&city=nyc");
    expect(state.board).toBe("sociability");
    expect(state.city).toBe("nyc");
    expect(state.metric).toBe(DEFAULT_STATE.metric);
    expect(state.compareFrom).toBeUndefined();
  });

  it("treats an empty locations list and an absent one differently", () => {
    expect(decodeBoardState("locations=").locations).toEqual([]);
    expect(decodeBoardState("").locations).toEqual(DEFAULT_STATE.locations);
  });

  it("is stable: encode(decode(encode(s))) === encode(s)", () => {
    const rand = mulberry32(7);
    for (let i = 0; i < 50; i++) {
      const encoded = encodeBoardState(randomState(rand));
      expect(encodeBoardState(decodeBoardState(encoded))).toBe(encoded);
    }
  });
});

describe("mondaysInRange", () => {
  it("lists the Mondays of the fixture range", () => {
    expect(mondaysInRange("2020-03-30", "2020-04-28")).toEqual([
      "2020-03-30",
      "2020-04-06",
      "2020-04-13",
      "2020-04-20",
      "2020-04-27",
    ]);
  });

  it("snaps a mid-week start back to its Monday", () => {
    expect(mondaysInRange("2020-04-01", "2020-04-14")).toEqual([
      "2020-03-30",
      "2020-04-06",
      "2020-04-13",
    ]);
  });

  it("returns nothing for malformed dates", () => {
    expect(mondaysInRange("soon", "later")).toEqual([]);
  });
});
