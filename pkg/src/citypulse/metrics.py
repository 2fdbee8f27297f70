"""Mobility-board statistics computed from warehouse series.

Everything here is a pure function over query results: weekly
baseline-relative changes, hourly critical-day profiles, daytime
travel-time reliability, speeding-segment shares, fatality rates, and
gross-vehicle-weight histograms. Percent changes are computed on weekly
aggregates (sum for counts, mean for travel time / speed), not on averaged
per-day percentages, so sparse days cannot skew a week.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone

import numpy as np

from .core import (
    MetricKind,
    SeriesKey,
    TimeSeriesRecord,
    WeekKey,
    local_day_range,
    local_week_range,
    same_week_prior_year,
    zone_for,
)

PRIOR_YEAR = "same_week_prior_year"
FIXED_REFERENCE = "fixed_reference_week"

#: Default GVW bin edges in kips; only the 100-kip "very heavy" boundary is
#: domain-sourced, the rest follow common weight-class practice.
DEFAULT_GVW_EDGES = (0.0, 10.0, 26.0, 100.0)

#: Daytime window for travel-time reliability, local hours [start, end).
DEFAULT_DAYTIME = (7, 19)


@dataclass(frozen=True)
class BaselineSpec:
    """How to pick the comparison data for percent changes."""

    mode: str  # PRIOR_YEAR | FIXED_REFERENCE
    reference_week: WeekKey | None = None

    def __post_init__(self) -> None:
        if self.mode not in (PRIOR_YEAR, FIXED_REFERENCE):
            raise ValueError(f"unknown baseline mode {self.mode!r}")
        if (self.mode == FIXED_REFERENCE) != (self.reference_week is not None):
            raise ValueError("reference_week is required iff mode is fixed_reference_week")

    def week_for(self, week: WeekKey) -> WeekKey:
        if self.mode == FIXED_REFERENCE:
            assert self.reference_week is not None
            return self.reference_week
        return same_week_prior_year(week)


@dataclass(frozen=True)
class WeeklyDelta:
    """One week's aggregate vs its baseline. status: ok|no_data|missing_baseline."""

    week: WeekKey
    status: str
    current: float | None = None
    baseline: float | None = None
    pct_change: float | None = None
    n_current: int = 0
    n_baseline: int = 0

    def to_json(self) -> dict:
        return {
            "week": str(self.week),
            "status": self.status,
            "currentMean": self.current,
            "baselineMean": self.baseline,
            "pctChange": self.pct_change,
            "sampleCounts": {"current": self.n_current, "baseline": self.n_baseline},
        }


@dataclass(frozen=True)
class HourlyProfile:
    """Per-local-hour means for one calendar day; absent hours are None."""

    day: date
    values: tuple[float | None, ...]  # length 24
    sample_counts: tuple[int, ...]  # length 24

    def to_json(self) -> dict:
        return {
            "day": self.day.isoformat(),
            "values": list(self.values),
            "sampleCounts": list(self.sample_counts),
        }


@dataclass(frozen=True)
class ReliabilityResult:
    """Sample standard deviation of daytime values over a window."""

    from_ts: datetime
    to_ts: datetime
    day_start: int
    day_end: int
    std_dev: float | None
    mean: float | None
    n: int

    def to_json(self) -> dict:
        return {
            "from": self.from_ts.isoformat(),
            "to": self.to_ts.isoformat(),
            "daytimeWindow": [self.day_start, self.day_end],
            "stdDev": self.std_dev,
            "mean": self.mean,
            "n": self.n,
        }


@dataclass(frozen=True)
class SpeedingShare:
    share: float | None  # None when no segment has data
    over: int
    total: int  # segments with data
    limit_mph: float
    per_segment: dict[str, float]  # location -> window mean speed
    no_data: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "share": self.share,
            "over": self.over,
            "total": self.total,
            "limitMph": self.limit_mph,
            "perSegment": dict(sorted(self.per_segment.items())),
            "noData": list(self.no_data),
        }


@dataclass(frozen=True)
class FatalityRate:
    rate_per_1000: float | None  # None (undefined) when no crashes in window
    fatalities: float
    crashes: float

    def to_json(self) -> dict:
        return {
            "ratePer1000": self.rate_per_1000,
            "defined": self.rate_per_1000 is not None,
            "fatalities": self.fatalities,
            "crashes": self.crashes,
        }


@dataclass(frozen=True)
class GvwHistogram:
    edges: tuple[float, ...]  # ascending; last bin is open-ended
    labels: tuple[str, ...]
    counts: tuple[int, ...]
    total: int

    def to_json(self) -> dict:
        return {
            "edges": list(self.edges),
            "labels": list(self.labels),
            "counts": list(self.counts),
            "total": self.total,
        }


@dataclass(frozen=True)
class WindowAggregate:
    from_ts: datetime
    to_ts: datetime
    agg: str
    value: float | None
    n: int

    def to_json(self) -> dict:
        return {
            "from": self.from_ts.isoformat(),
            "to": self.to_ts.isoformat(),
            "agg": self.agg,
            "value": self.value,
            "n": self.n,
        }


def default_agg(metric: MetricKind) -> str:
    """sum for count-like metrics, mean for rate-like ones."""
    return "mean" if metric in (MetricKind.TRAVEL_TIME, MetricKind.SPEED) else "sum"


def _aggregate(records: list[TimeSeriesRecord], agg: str) -> float | None:
    if not records:
        return None
    values = [r.value for r in records]
    if agg == "sum":
        return float(sum(values))
    if agg == "mean":
        return float(sum(values) / len(values))
    raise ValueError(f"unknown agg {agg!r}")


def _expected_points(week: WeekKey, city: str, cadence: timedelta) -> float:
    start, end = local_week_range(week, city)
    span = end.astimezone(timezone.utc) - start.astimezone(timezone.utc)
    return span / cadence


def weekly_delta(
    store,
    key: SeriesKey,
    weeks: list[WeekKey],
    baseline: BaselineSpec,
    agg: str | None = None,
    *,
    expected_cadence: timedelta | None = None,
    min_coverage: float = 0.5,
) -> list[WeeklyDelta]:
    """Percent change per requested week against its baseline week.

    Weeks with no current data (or, when the feed cadence is known, less
    than ``min_coverage`` of the expected points) come back as explicit
    ``no_data`` entries; a missing or zero baseline marks that week
    ``missing_baseline`` without aborting the others.
    """
    agg = agg or default_agg(key.metric)
    out: list[WeeklyDelta] = []
    for week in weeks:
        cur_records = store.query(key, *local_week_range(week, key.city))
        n_cur = len(cur_records)
        if expected_cadence is not None and n_cur > 0:
            coverage = n_cur / _expected_points(week, key.city, expected_cadence)
        else:
            coverage = 1.0 if n_cur else 0.0
        if n_cur == 0 or coverage < min_coverage:
            out.append(WeeklyDelta(week, "no_data", n_current=n_cur))
            continue

        base_week = baseline.week_for(week)
        base_records = store.query(key, *local_week_range(base_week, key.city))
        current = _aggregate(cur_records, agg)
        base = _aggregate(base_records, agg)
        if base is None or base == 0:
            out.append(
                WeeklyDelta(
                    week,
                    "missing_baseline",
                    current=current,
                    n_current=n_cur,
                    n_baseline=len(base_records),
                )
            )
            continue
        out.append(
            WeeklyDelta(
                week,
                "ok",
                current=current,
                baseline=base,
                pct_change=100.0 * (current - base) / base,
                n_current=n_cur,
                n_baseline=len(base_records),
            )
        )
    return out


def hourly_profile(store, key: SeriesKey, day: date) -> HourlyProfile:
    """Mean value per local hour of one civil day; empty hours stay absent.

    On DST days both occurrences of a repeated local hour fold into the
    same bucket, and the skipped hour simply has no samples.
    """
    start, end = local_day_range(day, key.city)
    zone = zone_for(key.city)
    sums = [0.0] * 24
    counts = [0] * 24
    for rec in store.query(key, start, end):
        hour = rec.ts.astimezone(zone).hour
        sums[hour] += rec.value
        counts[hour] += 1
    values = tuple(sums[h] / counts[h] if counts[h] else None for h in range(24))
    return HourlyProfile(day=day, values=values, sample_counts=tuple(counts))


def reliability(
    store,
    key: SeriesKey,
    from_ts: datetime,
    to_ts: datetime,
    day_start: int = DEFAULT_DAYTIME[0],
    day_end: int = DEFAULT_DAYTIME[1],
) -> ReliabilityResult:
    """Sample (n-1) standard deviation of values in the daytime window.

    With fewer than two daytime samples the deviation is absent rather
    than fabricated.
    """
    zone = zone_for(key.city)
    values = [
        rec.value
        for rec in store.query(key, from_ts, to_ts)
        if day_start <= rec.ts.astimezone(zone).hour < day_end
    ]
    n = len(values)
    if n < 2:
        mean = float(np.mean(values)) if values else None
        return ReliabilityResult(from_ts, to_ts, day_start, day_end, None, mean, n)
    arr = np.asarray(values, dtype=float)
    return ReliabilityResult(
        from_ts,
        to_ts,
        day_start,
        day_end,
        float(np.std(arr, ddof=1)),
        float(np.mean(arr)),
        n,
    )


def speeding_share(
    store,
    city: str,
    from_ts: datetime,
    to_ts: datetime,
    limit_mph: float = 25.0,
    segments: list[str] | None = None,
) -> SpeedingShare:
    """Share of road segments whose mean speed over the window exceeds the
    limit. Segments with no data are excluded from the denominator and
    reported separately.
    """
    if segments is None:
        segments = [
            info.key.location
            for info in store.list_series(city)
            if info.key.metric is MetricKind.SPEED
        ]
    per_segment: dict[str, float] = {}
    no_data: list[str] = []
    over = 0
    for segment in segments:
        records = store.query(SeriesKey(city, MetricKind.SPEED, segment), from_ts, to_ts)
        if not records:
            no_data.append(segment)
            continue
        mean = sum(r.value for r in records) / len(records)
        per_segment[segment] = mean
        if mean > limit_mph:
            over += 1
    total = len(per_segment)
    return SpeedingShare(
        share=(over / total) if total else None,
        over=over,
        total=total,
        limit_mph=limit_mph,
        per_segment=per_segment,
        no_data=tuple(no_data),
    )


def fatality_rate(store, city: str, from_ts: datetime, to_ts: datetime) -> FatalityRate:
    """Fatalities per 1000 crashes over a window, summed across locations.

    A zero-crash window yields an explicitly undefined rate instead of a
    division error.
    """
    def total(metric: MetricKind) -> float:
        acc = 0.0
        for info in store.list_series(city):
            if info.key.metric is metric:
                acc += sum(r.value for r in store.query(info.key, from_ts, to_ts))
        return acc

    fatalities = total(MetricKind.FATALITY_COUNT)
    crashes = total(MetricKind.CRASH_COUNT)
    rate = None if crashes == 0 else 1000.0 * fatalities / crashes
    return FatalityRate(rate_per_1000=rate, fatalities=fatalities, crashes=crashes)


def _bin_labels(edges: tuple[float, ...]) -> tuple[str, ...]:
    def fmt(x: float) -> str:
        return f"{x:g}"

    labels = [f"{fmt(edges[i])}-{fmt(edges[i + 1])}" for i in range(len(edges) - 1)]
    labels.append(f">{fmt(edges[-1])}")
    return tuple(labels)


def gvw_bins(
    store,
    key: SeriesKey,
    from_ts: datetime,
    to_ts: datetime,
    edges: tuple[float, ...] = DEFAULT_GVW_EDGES,
) -> GvwHistogram:
    """Histogram of weigh-in-motion records by gross vehicle weight.

    Bins are [e0,e1), [e1,e2), ..., [e_last, inf); every record lands in
    exactly one bin. An empty window is an all-zero histogram.
    """
    if list(edges) != sorted(set(edges)):
        raise ValueError("bin edges must be strictly ascending")
    if not edges or edges[0] > 0:
        raise ValueError("first bin edge must be 0 to cover all weights")
    counts = [0] * len(edges)
    for rec in store.query(key, from_ts, to_ts):
        idx = int(np.searchsorted(edges, rec.value, side="right")) - 1
        counts[idx] += 1
    return GvwHistogram(
        edges=tuple(edges),
        labels=_bin_labels(tuple(edges)),
        counts=tuple(counts),
        total=sum(counts),
    )


def gvw_bin_deltas(
    store,
    key: SeriesKey,
    window: tuple[datetime, datetime],
    baseline_window: tuple[datetime, datetime],
    edges: tuple[float, ...] = DEFAULT_GVW_EDGES,
) -> list[dict]:
    """Per-bin count change between two windows (current vs baseline)."""
    current = gvw_bins(store, key, *window, edges=edges)
    base = gvw_bins(store, key, *baseline_window, edges=edges)
    out = []
    for label, cur, prev in zip(current.labels, current.counts, base.counts):
        pct = None if prev == 0 else 100.0 * (cur - prev) / prev
        out.append({"bin": label, "current": cur, "baseline": prev, "pctChange": pct})
    return out


def window_aggregate(
    store,
    key: SeriesKey,
    from_ts: datetime,
    to_ts: datetime,
    agg: str | None = None,
) -> WindowAggregate:
    """Aggregate one series over one window (scenario-comparison building block)."""
    agg = agg or default_agg(key.metric)
    records = store.query(key, from_ts, to_ts)
    return WindowAggregate(from_ts, to_ts, agg, _aggregate(records, agg), len(records))


def compare_windows(
    store,
    key: SeriesKey,
    left: tuple[datetime, datetime],
    right: tuple[datetime, datetime],
    agg: str | None = None,
) -> dict:
    """Paired aggregates for two windows plus the right-vs-left change."""
    left_agg = window_aggregate(store, key, *left, agg=agg)
    right_agg = window_aggregate(store, key, *right, agg=agg)
    pct = None
    if left_agg.value not in (None, 0) and right_agg.value is not None:
        pct = 100.0 * (right_agg.value - left_agg.value) / left_agg.value
    return {"left": left_agg.to_json(), "right": right_agg.to_json(), "pctChange": pct}
