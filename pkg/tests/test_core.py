from datetime import date, datetime, timedelta, timezone
from zoneinfo import ZoneInfo

import pytest
from hypothesis import given, strategies as st

from citypulse.core import (
    BoundingBox,
    MetricKind,
    TimeSeriesRecord,
    WeekKey,
    local_week_range,
    parse_rfc3339,
    same_week_prior_year,
    week_key_for,
    zone_for,
)

NYC = ZoneInfo("America/New_York")


def test_week_key_mid_week():
    ts = datetime(2020, 3, 11, 9, 0, tzinfo=NYC)
    assert week_key_for(ts, "nyc") == WeekKey(date(2020, 3, 9))


def test_week_key_boundary_inclusive_at_start():
    ts = datetime(2020, 3, 9, 0, 0, tzinfo=NYC)
    assert week_key_for(ts, "nyc") == WeekKey(date(2020, 3, 9))


def test_week_key_instant_before_boundary():
    ts = datetime(2020, 3, 8, 23, 59, tzinfo=NYC)
    assert week_key_for(ts, "nyc") == WeekKey(date(2020, 3, 2))


def test_week_key_uses_city_local_time():
    # 2020-03-09 03:00 UTC is still Sunday evening in New York.
    ts = datetime(2020, 3, 9, 3, 0, tzinfo=timezone.utc)
    assert week_key_for(ts, "nyc") == WeekKey(date(2020, 3, 2))


def test_week_key_requires_monday():
    with pytest.raises(ValueError):
        WeekKey(date(2020, 3, 10))


@given(
    st.datetimes(
        min_value=datetime(2019, 1, 1),
        max_value=datetime(2021, 12, 31),
        timezones=st.just(timezone.utc),
    ),
    st.sampled_from(["nyc", "seattle"]),
)
def test_instant_falls_inside_its_week(ts, city):
    week = week_key_for(ts, city)
    local_day = ts.astimezone(zone_for(city)).date()
    assert week.monday <= local_day < week.monday + timedelta(days=7)


def test_local_week_range_covers_dst_transition():
    # US spring-forward (2020-03-08) makes the week of Mar 2 only 167 hours.
    # Same-tzinfo subtraction is wall-clock in Python, so compare via UTC.
    def absolute(week):
        start, end = local_week_range(week, "nyc")
        return end.astimezone(timezone.utc) - start.astimezone(timezone.utc)

    assert absolute(WeekKey(date(2020, 3, 2))) == timedelta(hours=167)
    assert absolute(WeekKey(date(2020, 3, 9))) == timedelta(hours=168)


def test_same_week_prior_year_aligns_by_week_index():
    assert same_week_prior_year(WeekKey(date(2020, 3, 30))) == WeekKey(date(2019, 4, 1))
    assert same_week_prior_year(WeekKey(date(2020, 4, 13))) == WeekKey(date(2019, 4, 15))
    assert same_week_prior_year(WeekKey(date(2020, 2, 24))) == WeekKey(date(2019, 2, 25))


def test_parse_rfc3339_requires_offset():
    assert parse_rfc3339("2020-03-11T09:00:00-04:00") == datetime(
        2020, 3, 11, 9, 0, tzinfo=timezone(timedelta(hours=-4))
    )
    assert parse_rfc3339("2020-03-11T13:00:00Z") == datetime(
        2020, 3, 11, 13, 0, tzinfo=timezone.utc
    )
    with pytest.raises(ValueError):
        parse_rfc3339("2020-03-11T09:00:00")


def test_record_round_trip_identity():
    rec = TimeSeriesRecord(
        city="nyc",
        metric=MetricKind.TRAVEL_TIME,
        location="corr495",
        ts=datetime(2020, 3, 11, 9, 0, tzinfo=NYC),
        value=42.5,
        meta={"direction": "eb"},
    )
    assert TimeSeriesRecord.from_json(rec.to_json()) == rec


@given(
    st.sampled_from(list(MetricKind)),
    st.floats(min_value=0.5, max_value=1e6, allow_nan=False),
    st.datetimes(
        min_value=datetime(2019, 1, 1),
        max_value=datetime(2021, 1, 1),
        timezones=st.just(timezone.utc),
    ),
)
def test_record_round_trip_property(metric, value, ts):
    rec = TimeSeriesRecord("nyc", metric, "loc1", ts, value)
    assert TimeSeriesRecord.from_json(rec.to_json()) == rec


def test_week_key_round_trip():
    wk = WeekKey(date(2020, 3, 9))
    assert WeekKey.parse(str(wk)) == wk


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(metric=MetricKind.TRAFFIC_VOLUME, value=float("nan")),
        dict(metric=MetricKind.TRAFFIC_VOLUME, value=-1.0),
        dict(metric=MetricKind.TRAVEL_TIME, value=0.0),
        dict(metric=MetricKind.SPEED, value=-0.1),
    ],
)
def test_record_value_invariants(kwargs):
    with pytest.raises(ValueError):
        TimeSeriesRecord(
            "nyc", kwargs["metric"], "loc", datetime(2020, 1, 1, tzinfo=NYC), kwargs["value"]
        )


def test_record_rejects_naive_timestamp():
    with pytest.raises(ValueError):
        TimeSeriesRecord(
            "nyc", MetricKind.SPEED, "loc", datetime(2020, 1, 1), 10.0
        )


def test_unknown_metric_token_rejected():
    with pytest.raises(ValueError):
        MetricKind("congestion_index")


@pytest.mark.parametrize("bad", [(0, 0, 0, 10), (0, 0, 10, 0), (-1, 0, 5, 5)])
def test_bounding_box_invariants(bad):
    with pytest.raises(ValueError):
        BoundingBox(*bad)
