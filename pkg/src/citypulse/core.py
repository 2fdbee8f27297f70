"""Shared domain types: metric kinds, records, weeks, boxes, and city time.

Everything here is an immutable value. All bucketing (weeks, hours, days)
happens in the city's civil local time; records themselves carry an
explicit UTC offset so instants are unambiguous on the wire.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from math import isfinite
from zoneinfo import ZoneInfo


class MetricKind(str, enum.Enum):
    """Closed enumeration of ingestable metrics; unknown tokens are rejected."""

    TRAFFIC_VOLUME = "traffic_volume"
    TRAVEL_TIME = "travel_time"
    TRANSIT_RIDERSHIP = "transit_ridership"
    BIKE_COUNT = "bike_count"
    PED_COUNT = "ped_count"
    CRASH_COUNT = "crash_count"
    FATALITY_COUNT = "fatality_count"
    SPEEDING_TICKET_COUNT = "speeding_ticket_count"
    TRUCK_GVW = "truck_gvw"
    PARKING_OCCUPANCY = "parking_occupancy"
    COMPLAINT_COUNT = "complaint_count"
    SPEED = "speed"

    def __str__(self) -> str:
        return self.value


#: Metrics whose values are event/occupancy counts (canonical unit: count, >= 0).
COUNT_KINDS = frozenset(
    {
        MetricKind.TRAFFIC_VOLUME,
        MetricKind.TRANSIT_RIDERSHIP,
        MetricKind.BIKE_COUNT,
        MetricKind.PED_COUNT,
        MetricKind.CRASH_COUNT,
        MetricKind.FATALITY_COUNT,
        MetricKind.SPEEDING_TICKET_COUNT,
        MetricKind.PARKING_OCCUPANCY,
        MetricKind.COMPLAINT_COUNT,
    }
)

#: Canonical unit label per metric kind. Converters live in ingestion.
CANONICAL_UNITS = {
    MetricKind.TRAFFIC_VOLUME: "count",
    MetricKind.TRAVEL_TIME: "min",
    MetricKind.TRANSIT_RIDERSHIP: "count",
    MetricKind.BIKE_COUNT: "count",
    MetricKind.PED_COUNT: "count",
    MetricKind.CRASH_COUNT: "count",
    MetricKind.FATALITY_COUNT: "count",
    MetricKind.SPEEDING_TICKET_COUNT: "count",
    MetricKind.TRUCK_GVW: "kips",
    MetricKind.PARKING_OCCUPANCY: "count",
    MetricKind.COMPLAINT_COUNT: "count",
    MetricKind.SPEED: "mph",
}


class ObjectClass(str, enum.Enum):
    """Traffic-related object classes kept from camera detections."""

    PERSON = "person"
    CAR = "car"
    TRUCK = "truck"
    BICYCLE = "bicycle"
    BUS = "bus"

    def __str__(self) -> str:
        return self.value


#: Default city -> IANA zone map; extend via config or register_city_zone().
DEFAULT_CITY_ZONES = {
    "nyc": "America/New_York",
    "seattle": "America/Los_Angeles",
}

_city_zones: dict[str, str] = dict(DEFAULT_CITY_ZONES)


def register_city_zone(city: str, zone_name: str) -> None:
    """Register (or override) the IANA zone used for a city's civil time."""
    ZoneInfo(zone_name)  # fail fast on bad names
    _city_zones[city] = zone_name


def zone_for(city: str) -> ZoneInfo:
    """IANA zone for a city id; unknown cities fall back to UTC."""
    return ZoneInfo(_city_zones.get(city, "UTC"))


def parse_rfc3339(text: str) -> datetime:
    """Parse an RFC-3339 timestamp; the UTC offset is mandatory.

    Raises ValueError for naive timestamps or unparseable text.
    """
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    dt = datetime.fromisoformat(raw)
    if dt.tzinfo is None:
        raise ValueError(f"timestamp lacks a UTC offset: {text!r}")
    return dt


def format_local(ts: datetime, city: str) -> str:
    """Render an instant as RFC-3339 in the city's local offset."""
    return ts.astimezone(zone_for(city)).isoformat()


@dataclass(frozen=True, order=True)
class SeriesKey:
    """Identity of one stored series; lexicographic order is iteration order."""

    city: str
    metric: MetricKind
    location: str

    def as_tuple(self) -> tuple[str, str, str]:
        return (self.city, self.metric.value, self.location)


@dataclass(frozen=True)
class TimeSeriesRecord:
    """One observation of one metric at one location and instant.

    Values are stored in the metric's canonical unit (minutes for
    travel_time, mph for speed, kips for truck_gvw, plain counts
    otherwise).
    """

    city: str
    metric: MetricKind
    location: str
    ts: datetime
    value: float
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.ts.tzinfo is None:
            raise ValueError("record timestamp must carry a UTC offset")
        if not isfinite(self.value):
            raise ValueError("record value must be finite")
        if self.metric in COUNT_KINDS and self.value < 0:
            raise ValueError(f"{self.metric} must be >= 0")
        if self.metric is MetricKind.TRAVEL_TIME and self.value <= 0:
            raise ValueError("travel_time must be > 0")
        if self.metric is MetricKind.SPEED and self.value < 0:
            raise ValueError("speed must be >= 0")
        if self.metric is MetricKind.TRUCK_GVW and self.value < 0:
            raise ValueError("truck_gvw must be >= 0")

    @property
    def key(self) -> SeriesKey:
        return SeriesKey(self.city, self.metric, self.location)

    def to_json(self) -> dict:
        doc: dict = {
            "city": self.city,
            "metric": self.metric.value,
            "location": self.location,
            "ts": self.ts.isoformat(),
            "value": self.value,
        }
        if self.meta:
            doc["meta"] = dict(self.meta)
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "TimeSeriesRecord":
        return cls(
            city=doc["city"],
            metric=MetricKind(doc["metric"]),
            location=doc["location"],
            ts=parse_rfc3339(doc["ts"]),
            value=float(doc["value"]),
            meta=dict(doc.get("meta", {})),
        )


@dataclass(frozen=True, order=True)
class WeekKey:
    """A Monday-started week, named by its Monday (half-open, local time)."""

    monday: date

    def __post_init__(self) -> None:
        if self.monday.weekday() != 0:
            raise ValueError(f"{self.monday} is not a Monday")

    def __str__(self) -> str:
        return self.monday.isoformat()

    @classmethod
    def parse(cls, text: str) -> "WeekKey":
        return cls(date.fromisoformat(text))

    def next(self) -> "WeekKey":
        return WeekKey(self.monday + timedelta(days=7))


def week_key_for(ts: datetime, city: str) -> WeekKey:
    """Monday-started week containing an instant, in the city's local time."""
    local = ts.astimezone(zone_for(city))
    d = local.date()
    return WeekKey(d - timedelta(days=d.weekday()))


def local_week_range(week: WeekKey, city: str) -> tuple[datetime, datetime]:
    """Absolute [start, end) instants of a local civil week.

    DST transitions make some weeks 167 or 169 hours long; boundaries are
    local midnights regardless.
    """
    zone = zone_for(city)
    start = datetime.combine(week.monday, datetime.min.time(), tzinfo=zone)
    end = datetime.combine(week.monday + timedelta(days=7), datetime.min.time(), tzinfo=zone)
    return start, end


def local_day_range(day: date, city: str) -> tuple[datetime, datetime]:
    """Absolute [start, end) instants of one local civil day (23-25 h on DST days)."""
    zone = zone_for(city)
    start = datetime.combine(day, datetime.min.time(), tzinfo=zone)
    end = datetime.combine(day + timedelta(days=1), datetime.min.time(), tzinfo=zone)
    return start, end


def first_monday_of_year(year: int) -> date:
    d = date(year, 1, 1)
    return d + timedelta(days=(7 - d.weekday()) % 7)


def same_week_prior_year(week: WeekKey) -> WeekKey:
    """Prior-year week aligned by index from the year's first Monday.

    Calendar-date alignment breaks across leap years; index alignment keeps
    weekday structure intact.
    """
    year = week.monday.year
    index = (week.monday - first_monday_of_year(year)).days // 7
    return WeekKey(first_monday_of_year(year - 1) + timedelta(weeks=index))


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel box, top-left corner plus size."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise ValueError("bounding box must have positive width and height")
        if self.x < 0 or self.y < 0:
            raise ValueError("bounding box coordinates must be >= 0")

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]
