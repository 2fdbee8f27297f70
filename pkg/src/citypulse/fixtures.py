"""Deterministic demo/test dataset generators.

Real upstream feeds (the agency APIs this platform was built around) are
not redistributable, so these generators construct synthetic feed files
whose aggregate statistics land on documented target values:

* Seattle I-5 weekly traffic-volume deltas vs the same weeks of the prior
  year: -46.91 / -41.95 / -35.50 / -26.31 percent.
* Seattle corridor travel-time reliability: daytime (7-19h) sample standard
  deviation 6.43 min in the week of Feb 24, 0.67 min in the week of
  Apr 27 (the "week of Apr 30").
* Critical-day travel-time profiles: commute peaks at 8h and 17h on
  2020-02-28, flat near-free-flow curves on 2020-03-24 and 2020-04-14.
* NYC speeding: 12 of 145 segments (8.3%) above the 25 mph limit, 41
  (28%) above 20 mph, on the 2020-04-15 morning peak.
* NYC fatality rate: 7 fatalities / 5000 crashes = 1.4 per 1000.
* NYC freight: very heavy trucks (>100 kips) down exactly 30% between two
  windows.
* Broadway & E Pike camera: 125 frames, average pedestrian density 3.2,
  max 12, social-distancing compliance 0.89 (44 of 400 pedestrians in a
  violated pair).

The numeric targets are forced by construction; nothing here re-derives
them from real data.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from pathlib import Path

from .core import WeekKey, same_week_prior_year, zone_for

SEATTLE_WEEKS = (
    WeekKey(date(2020, 3, 30)),
    WeekKey(date(2020, 4, 13)),
    WeekKey(date(2020, 4, 27)),
    WeekKey(date(2020, 5, 11)),
)
SEATTLE_WEEKLY_TOTALS = (5309, 5805, 6450, 7369)
SEATTLE_BASELINE_TOTAL = 10000
SEATTLE_WEEKLY_PCT = (-46.91, -41.95, -35.50, -26.31)

RELIABILITY_WEEKS = (WeekKey(date(2020, 2, 24)), WeekKey(date(2020, 4, 27)))
RELIABILITY_STD_MIN = (6.43, 0.67)
RELIABILITY_MEANS = (18.0, 12.0)

PROFILE_PEAK_DAY = date(2020, 2, 28)
PROFILE_FLAT_DAYS = (date(2020, 3, 24), date(2020, 4, 14))

SPEEDING_DAY = date(2020, 4, 15)
SPEEDING_OVER_25 = 12
SPEEDING_OVER_20 = 41
SPEEDING_SEGMENTS = 145

FATALITY_TOTAL = 7
CRASH_TOTAL = 5000

GVW_WINDOW_A = (date(2020, 2, 3), date(2020, 3, 13))
GVW_WINDOW_B = (date(2020, 3, 13), date(2020, 4, 12))
GVW_HEAVY_A, GVW_HEAVY_B = 100, 70  # -30%

BROADWAY_CAMERA = "bwy_epike"
BROADWAY_DAY = date(2020, 5, 18)
BROADWAY_FRAMES = 125
BROADWAY_AVG_DENSITY = 3.2
BROADWAY_MAX_DENSITY = 12
BROADWAY_COMPLIANCE = 0.89

CONFIG_TEXT = """\
[city:nyc]
timezone = America/New_York

[city:seattle]
timezone = America/Los_Angeles

[thresholds]
accuracy = 0.9
validity = 0.9
timeliness = 0.5
granularity = 0.5

[sociability]
assumed_height_m = 1.70
distance_threshold_m = 1.8288
confidence_cutoff = 0.5
min_box_height_px = 8

[api]
cors_origin = *

[feed:sea_volume]
city = seattle
metric = traffic_volume
format = csv
cadence = 1d
valid_min = 0
valid_max = 1000000
unit = count
staleness = 30d

[feed:sea_tt]
city = seattle
metric = travel_time
format = csv
cadence = 1h
valid_min = 0
valid_max = 200
unit = min
staleness = 30d

[feed:nyc_speed]
city = nyc
metric = speed
format = csv
cadence = 15m
valid_min = 0
valid_max = 120
unit = mph
staleness = 30d

[feed:nyc_crash]
city = nyc
metric = crash_count
format = csv
cadence = 1d
valid_min = 0
valid_max = 100000
staleness = 90d

[feed:nyc_fatal]
city = nyc
metric = fatality_count
format = csv
cadence = 1d
valid_min = 0
valid_max = 1000
staleness = 90d

[feed:nyc_gvw]
city = nyc
metric = truck_gvw
format = csv
cadence = 1d
valid_min = 0
valid_max = 200
unit = kips
staleness = 90d

[feed:sea_cam_broadway]
city = seattle
metric = detection_frames
format = ndjson
cadence = 30s
confidence_cutoff = 0.5
staleness = 1d

[feed:nyc_cam_park]
city = nyc
metric = detection_frames
format = ndjson
cadence = 30s
confidence_cutoff = 0.5
staleness = 1d
"""

CSV_HEADER_LINE = "city,metric,location,timestamp,value"


@dataclass(frozen=True)
class FixtureFile:
    path: Path
    feed_id: str
    as_of: datetime  # evaluation "now" to use when ingesting this file


@dataclass
class FixtureDataset:
    root: Path
    config_path: Path
    files: list[FixtureFile]


def _csv(path: Path, rows: list[tuple[str, str, str, datetime, float]]) -> datetime:
    lines = [CSV_HEADER_LINE]
    latest = None
    for city, metric, location, ts, value in rows:
        lines.append(f"{city},{metric},{location},{ts.isoformat()},{value!r}")
        latest = ts if latest is None or ts > latest else latest
    path.write_text("\n".join(lines) + "\n")
    return latest


def _local(city: str, day: date, hour: int = 0, minute: int = 0) -> datetime:
    return datetime(day.year, day.month, day.day, hour, minute, tzinfo=zone_for(city))


def _weekly_volume_rows(week: WeekKey, total: int) -> list[tuple]:
    base, leftover = divmod(total, 7)
    rows = []
    for i in range(7):
        value = base + (leftover if i == 6 else 0)
        rows.append(
            ("seattle", "traffic_volume", "i5_downtown",
             _local("seattle", week.monday + timedelta(days=i), 12), float(value))
        )
    return rows


def _reliability_week_rows(week: WeekKey, target_std: float, mean: float) -> list[tuple]:
    # 84 daytime points, half at mean+d and half at mean-d, give a sample
    # standard deviation of exactly d*sqrt(84/83); solve d for the target.
    d = target_std * math.sqrt(83.0 / 84.0)
    rows = []
    flip = 1
    for day_idx in range(7):
        day = week.monday + timedelta(days=day_idx)
        for hour in range(24):
            if 7 <= hour < 19:
                value = mean + flip * d
                flip = -flip
            else:
                value = mean  # night values must not leak into the daytime window
            rows.append(
                ("seattle", "travel_time", "i5_downtown", _local("seattle", day, hour), value)
            )
    return rows


def _profile_day_rows(day: date, peaks: bool) -> list[tuple]:
    rows = []
    for hour in range(24):
        value = 12.0
        if peaks:
            if hour in (8, 17):
                value = 30.0
            elif hour in (7, 9, 16, 18):
                value = 20.0
        rows.append(
            ("seattle", "travel_time", "i5_greenlake", _local("seattle", day, hour), value)
        )
    return rows


def _speeding_rows() -> list[tuple]:
    means = [27.0] * SPEEDING_OVER_25
    means += [22.0] * (SPEEDING_OVER_20 - SPEEDING_OVER_25)
    means += [15.0] * (SPEEDING_SEGMENTS - SPEEDING_OVER_20)
    rows = []
    for i, mean in enumerate(means):
        for k in range(4):
            ts = _local("nyc", SPEEDING_DAY, 8, 15 * k)
            rows.append(("nyc", "speed", f"seg{i:03d}", ts, mean + (0.5 if k % 2 else -0.5)))
    return rows


def _safety_rows(metric: str, daily: list[int]) -> list[tuple]:
    start = date(2020, 4, 1)
    return [
        ("nyc", metric, "citywide", _local("nyc", start + timedelta(days=i), 12), float(v))
        for i, v in enumerate(daily)
    ]


def _gvw_rows(window: tuple[date, date], heavy: int, rng: random.Random) -> list[tuple]:
    start, end = window
    days = (end - start).days
    rows = []

    def stamp(i: int, n: int) -> datetime:
        day = start + timedelta(days=(i * days) // max(n, 1))
        return _local("nyc", day, 6 + (i % 12), (i * 13) % 60)

    weights = [rng.uniform(104.0, 150.0) for _ in range(heavy)]
    weights += [rng.uniform(1.0, 9.0) for _ in range(40)]
    weights += [rng.uniform(11.0, 25.0) for _ in range(30)]
    weights += [rng.uniform(27.0, 95.0) for _ in range(50)]
    for i, w in enumerate(weights):
        rows.append(("nyc", "truck_gvw", "qb_wim", stamp(i, len(weights)), round(w, 1)))
    return rows


def _person(x: float, y: float) -> dict:
    return {"class": "person", "conf": 0.92, "bbox": [x, y, 50, 170]}


def _broadway_frame_specs(rng: random.Random) -> list[list[dict]]:
    """125 frames totalling 400 pedestrians, 44 of them in violated pairs.

    Cluster geometry at box height 170 px: the meters-per-pixel ratio is
    0.01, so a 100 px gap is 1.0 m (violation at the 6 ft threshold) and
    cluster spacing of 600 px keeps everyone else 5 m apart.
    """
    def close_pair(cx: float, y: float) -> list[dict]:
        return [_person(cx - 50, y), _person(cx + 50, y)]

    specs: list[list[dict]] = []
    # 1 frame, 12 persons, 6 violated pairs
    specs.append([p for c in range(6) for p in close_pair(300 + 600 * c, 200)])
    # 8 frames, 5 persons each: one violated pair + 3 singles
    for k in range(8):
        frame = close_pair(300, 240 + k)
        frame += [_person(900, 200), _person(1500, 300), _person(2100, 250)]
        specs.append(frame)
    # 8 frames, 3 persons each: one violated pair + 1 single
    for k in range(8):
        specs.append(close_pair(400, 180 + k) + [_person(1200, 260)])
    # 108 frames, 3 persons each, all far apart
    for k in range(108):
        specs.append([_person(200, 150 + k % 9), _person(800, 300), _person(1400, 220)])

    # noise that must not change the statistics: vehicles and sub-cutoff persons
    for idx in range(0, len(specs), 7):
        specs[idx] = specs[idx] + [{"class": "car", "conf": 0.85, "bbox": [2600, 400, 120, 80]}]
    for idx in range(0, len(specs), 11):
        specs[idx] = specs[idx] + [{"class": "person", "conf": 0.31, "bbox": [2800, 150, 50, 170]}]

    rng.shuffle(specs)
    return specs


def _ndjson_frames(path: Path, city: str, camera: str, start: datetime,
                   frame_specs: list[list[dict]]) -> datetime:
    lines = []
    ts = start
    for seq, detections in enumerate(frame_specs, start=1):
        lines.append(json.dumps({
            "camera": camera,
            "city": city,
            "ts": ts.isoformat(),
            "seq": seq,
            "detections": detections,
        }))
        ts += timedelta(seconds=30)
    path.write_text("\n".join(lines) + "\n")
    return ts - timedelta(seconds=30)


def build_fixture_dataset(root: str | Path) -> FixtureDataset:
    """Write the complete demo dataset (config + feed files) under root."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    config_path = root / "config.ini"
    config_path.write_text(CONFIG_TEXT)
    rng = random.Random(20200518)
    files: list[FixtureFile] = []

    def add(path: Path, feed_id: str, latest: datetime) -> None:
        files.append(FixtureFile(path, feed_id, latest + timedelta(minutes=1)))

    for week, total in zip(SEATTLE_WEEKS, SEATTLE_WEEKLY_TOTALS):
        path = root / f"sea_volume__{week}.csv"
        add(path, "sea_volume", _csv(path, _weekly_volume_rows(week, total)))
        baseline_week = same_week_prior_year(week)
        path = root / f"sea_volume__{baseline_week}.csv"
        add(path, "sea_volume",
            _csv(path, _weekly_volume_rows(baseline_week, SEATTLE_BASELINE_TOTAL)))

    for week, std, mean in zip(RELIABILITY_WEEKS, RELIABILITY_STD_MIN, RELIABILITY_MEANS):
        path = root / f"sea_tt__{week}.csv"
        add(path, "sea_tt", _csv(path, _reliability_week_rows(week, std, mean)))

    path = root / f"sea_tt__{PROFILE_PEAK_DAY}.csv"
    add(path, "sea_tt", _csv(path, _profile_day_rows(PROFILE_PEAK_DAY, peaks=True)))
    for day in PROFILE_FLAT_DAYS:
        path = root / f"sea_tt__{day}.csv"
        add(path, "sea_tt", _csv(path, _profile_day_rows(day, peaks=False)))

    path = root / f"nyc_speed__{SPEEDING_DAY}.csv"
    add(path, "nyc_speed", _csv(path, _speeding_rows()))

    crash_daily = [238] * 20 + [240]  # sums to 5000
    fatal_daily = [1] * 7 + [0] * 14  # sums to 7
    path = root / "nyc_crash__2020-04.csv"
    add(path, "nyc_crash", _csv(path, _safety_rows("crash_count", crash_daily)))
    path = root / "nyc_fatal__2020-04.csv"
    add(path, "nyc_fatal", _csv(path, _safety_rows("fatality_count", fatal_daily)))

    path = root / "nyc_gvw__winA.csv"
    add(path, "nyc_gvw", _csv(path, _gvw_rows(GVW_WINDOW_A, GVW_HEAVY_A, rng)))
    path = root / "nyc_gvw__winB.csv"
    add(path, "nyc_gvw", _csv(path, _gvw_rows(GVW_WINDOW_B, GVW_HEAVY_B, rng)))

    path = root / "sea_cam_broadway__2020-05-18.ndjson"
    start = _local("seattle", BROADWAY_DAY, 12)
    add(path, "sea_cam_broadway",
        _ndjson_frames(path, "seattle", BROADWAY_CAMERA, start, _broadway_frame_specs(rng)))

    # small second-city camera so multi-city listings have content
    park_specs = [[_person(200, 100), _person(900, 300)] for _ in range(6)]
    park_specs += [[_person(300, 120)] for _ in range(6)]
    path = root / "nyc_cam_park__2020-04-02.ndjson"
    start = _local("nyc", date(2020, 4, 2), 10)
    add(path, "nyc_cam_park", _ndjson_frames(path, "nyc", "park_cam", start, park_specs))

    return FixtureDataset(root=root, config_path=config_path, files=files)
