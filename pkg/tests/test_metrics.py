import math
import random
from datetime import date, datetime, timedelta, timezone

import pytest

from citypulse.core import MetricKind, SeriesKey, TimeSeriesRecord, WeekKey, zone_for
from citypulse.metrics import (
    FIXED_REFERENCE,
    PRIOR_YEAR,
    BaselineSpec,
    compare_windows,
    fatality_rate,
    gvw_bin_deltas,
    gvw_bins,
    hourly_profile,
    reliability,
    speeding_share,
    weekly_delta,
)
from citypulse.warehouse import Warehouse

UTC = timezone.utc
SEA = zone_for("seattle")
VOLUME_KEY = SeriesKey("seattle", MetricKind.TRAFFIC_VOLUME, "i5_downtown")
TT_KEY = SeriesKey("seattle", MetricKind.TRAVEL_TIME, "i5_corridor")

_batch_counter = 0


def add_records(store, records):
    global _batch_counter
    _batch_counter += 1
    store.append(f"test-batch-{_batch_counter}", records=records)


def daily_sum_records(key, week: WeekKey, total: int):
    """Seven daily integer records summing exactly to `total`."""
    base = total // 7
    leftovers = total - base * 7
    records = []
    for day in range(7):
        value = base + (leftovers if day == 6 else 0)
        ts = datetime.combine(
            week.monday + timedelta(days=day), datetime.min.time(), tzinfo=SEA
        ) + timedelta(hours=12)
        records.append(TimeSeriesRecord(key.city, key.metric, key.location, ts, float(value)))
    return records


@pytest.fixture
def store(tmp_path):
    with Warehouse(tmp_path / "wh", writer=True) as wh:
        yield wh


WEEKS_2020 = [WeekKey(date(2020, 3, 30)), WeekKey(date(2020, 4, 13)),
              WeekKey(date(2020, 4, 27)), WeekKey(date(2020, 5, 11))]
CURRENT_TOTALS = [5309, 5805, 6450, 7369]


def seed_volume_fixture(store):
    from citypulse.core import same_week_prior_year

    records = []
    for week, total in zip(WEEKS_2020, CURRENT_TOTALS):
        records += daily_sum_records(VOLUME_KEY, week, total)
        records += daily_sum_records(VOLUME_KEY, same_week_prior_year(week), 10000)
    add_records(store, records)


def test_weekly_delta_matches_target_percentages(store):
    seed_volume_fixture(store)
    deltas = weekly_delta(store, VOLUME_KEY, WEEKS_2020, BaselineSpec(PRIOR_YEAR), "sum")
    assert [d.status for d in deltas] == ["ok"] * 4
    assert [d.pct_change for d in deltas] == pytest.approx(
        [-46.91, -41.95, -35.50, -26.31], abs=1e-9
    )


def test_weekly_delta_identity_when_equal(store):
    week = WeekKey(date(2020, 3, 30))
    from citypulse.core import same_week_prior_year

    add_records(store, daily_sum_records(VOLUME_KEY, week, 4200))
    add_records(store, daily_sum_records(VOLUME_KEY, same_week_prior_year(week), 4200))
    (delta,) = weekly_delta(store, VOLUME_KEY, [week], BaselineSpec(PRIOR_YEAR), "sum")
    assert delta.pct_change == pytest.approx(0.0)


def test_weekly_delta_no_data_marker(store):
    seed_volume_fixture(store)
    missing_week = WeekKey(date(2020, 6, 1))
    deltas = weekly_delta(
        store, VOLUME_KEY, [WEEKS_2020[0], missing_week], BaselineSpec(PRIOR_YEAR), "sum"
    )
    assert deltas[0].status == "ok"
    assert deltas[1].status == "no_data"
    assert deltas[1].week == missing_week


def test_weekly_delta_missing_baseline_does_not_abort(store):
    week_with_base, week_without = WEEKS_2020[0], WEEKS_2020[1]
    from citypulse.core import same_week_prior_year

    add_records(
        store,
        daily_sum_records(VOLUME_KEY, week_with_base, 5309)
        + daily_sum_records(VOLUME_KEY, same_week_prior_year(week_with_base), 10000)
        + daily_sum_records(VOLUME_KEY, week_without, 5805),
    )
    deltas = weekly_delta(
        store, VOLUME_KEY, [week_with_base, week_without], BaselineSpec(PRIOR_YEAR), "sum"
    )
    assert deltas[0].status == "ok"
    assert deltas[1].status == "missing_baseline"
    assert deltas[1].current == pytest.approx(5805)


def test_weekly_delta_fixed_reference_week(store):
    ref = WeekKey(date(2020, 2, 24))
    week = WeekKey(date(2020, 3, 30))
    add_records(
        store,
        daily_sum_records(VOLUME_KEY, ref, 10000) + daily_sum_records(VOLUME_KEY, week, 5309),
    )
    (delta,) = weekly_delta(
        store, VOLUME_KEY, [week], BaselineSpec(FIXED_REFERENCE, ref), "sum"
    )
    assert delta.pct_change == pytest.approx(-46.91, abs=1e-9)


def test_weekly_delta_coverage_gate(store):
    week = WeekKey(date(2020, 3, 30))
    from citypulse.core import same_week_prior_year

    records = daily_sum_records(VOLUME_KEY, week, 700)[:3]  # 3 of 7 expected days
    add_records(store, records + daily_sum_records(VOLUME_KEY, same_week_prior_year(week), 700))
    (delta,) = weekly_delta(
        store,
        VOLUME_KEY,
        [week],
        BaselineSpec(PRIOR_YEAR),
        "sum",
        expected_cadence=timedelta(days=1),
    )
    assert delta.status == "no_data"


def test_weekly_delta_scale_covariance(store):
    seed_volume_fixture(store)
    deltas = weekly_delta(store, VOLUME_KEY, WEEKS_2020, BaselineSpec(PRIOR_YEAR), "sum")

    scaled_key = SeriesKey("seattle", MetricKind.TRAFFIC_VOLUME, "i5_scaled")
    c = 3.7
    from citypulse.core import same_week_prior_year

    records = []
    for week, total in zip(WEEKS_2020, CURRENT_TOTALS):
        records += [
            TimeSeriesRecord(r.city, r.metric, "i5_scaled", r.ts, r.value * c)
            for r in daily_sum_records(VOLUME_KEY, week, total)
        ]
        records += [
            TimeSeriesRecord(r.city, r.metric, "i5_scaled", r.ts, r.value * c)
            for r in daily_sum_records(VOLUME_KEY, same_week_prior_year(week), 10000)
        ]
    add_records(store, records)
    scaled = weekly_delta(store, scaled_key, WEEKS_2020, BaselineSpec(PRIOR_YEAR), "sum")
    for a, b in zip(deltas, scaled):
        assert b.pct_change == pytest.approx(a.pct_change, rel=1e-9)


def test_baseline_spec_invariant():
    with pytest.raises(ValueError):
        BaselineSpec(FIXED_REFERENCE)
    with pytest.raises(ValueError):
        BaselineSpec(PRIOR_YEAR, WeekKey(date(2020, 2, 24)))


# -- hourly profile ------------------------------------------------------


def hourly_records(key, day, value_by_hour):
    records = []
    for hour, values in value_by_hour.items():
        for k, value in enumerate(values):
            ts = datetime.combine(day, datetime.min.time(), tzinfo=SEA) + timedelta(
                hours=hour, minutes=k
            )
            records.append(TimeSeriesRecord(key.city, key.metric, key.location, ts, value))
    return records


def test_hourly_profile_constant_series(store):
    day = date(2020, 2, 28)
    add_records(store, hourly_records(TT_KEY, day, {h: [10.0] for h in range(24)}))
    profile = hourly_profile(store, TT_KEY, day)
    assert profile.values == tuple([10.0] * 24)
    assert profile.sample_counts == tuple([1] * 24)


def test_hourly_profile_sparse_hours(store):
    day = date(2020, 2, 28)
    add_records(store, hourly_records(TT_KEY, day, {8: [40.0, 60.0]}))
    profile = hourly_profile(store, TT_KEY, day)
    assert profile.values[8] == pytest.approx(50.0)
    assert profile.sample_counts[8] == 2
    assert all(v is None for h, v in enumerate(profile.values) if h != 8)


def test_hourly_profile_commute_peaks(store):
    day = date(2020, 2, 28)
    shape = {h: [12.0] for h in range(24)}
    shape[7] = [20.0]
    shape[9] = [20.0]
    shape[16] = [20.0]
    shape[18] = [20.0]
    shape[8] = [30.0]
    shape[17] = [30.0]
    add_records(store, hourly_records(TT_KEY, day, shape))
    profile = hourly_profile(store, TT_KEY, day)
    ranked = sorted(range(24), key=lambda h: profile.values[h], reverse=True)
    assert set(ranked[:2]) == {8, 17}


def test_hourly_profile_conservation(store):
    rng = random.Random(5)
    day = date(2020, 2, 28)
    shape = {h: [rng.uniform(5, 50) for _ in range(rng.randint(0, 4))] for h in range(24)}
    records = hourly_records(TT_KEY, day, shape)
    if not records:  # ensure non-trivial
        shape[3] = [7.0]
        records = hourly_records(TT_KEY, day, shape)
    add_records(store, records)
    profile = hourly_profile(store, TT_KEY, day)
    reconstructed = sum(
        v * c for v, c in zip(profile.values, profile.sample_counts) if v is not None
    )
    assert reconstructed == pytest.approx(sum(r.value for r in records), rel=1e-9)


# -- reliability ---------------------------------------------------------


def test_reliability_constant_values(store):
    day = date(2020, 2, 24)
    add_records(store, hourly_records(TT_KEY, day, {h: [12.0] for h in range(7, 19)}))
    window = (
        datetime(2020, 2, 24, tzinfo=SEA),
        datetime(2020, 2, 25, tzinfo=SEA),
    )
    result = reliability(store, TT_KEY, *window)
    assert result.std_dev == pytest.approx(0.0)
    assert result.n == 12


def test_reliability_hand_computed_pair(store):
    day = date(2020, 2, 24)
    add_records(
        store,
        hourly_records(TT_KEY, day, {9: [10.0], 10: [14.0], 2: [200.0], 22: [300.0]}),
    )
    window = (datetime(2020, 2, 24, tzinfo=SEA), datetime(2020, 2, 25, tzinfo=SEA))
    result = reliability(store, TT_KEY, *window)
    # night values (hours 2 and 22) are outside the 7-19 daytime window
    assert result.n == 2
    assert result.std_dev == pytest.approx(2.8284271247461903, rel=1e-12)
    assert result.mean == pytest.approx(12.0)


def test_reliability_insufficient_data(store):
    day = date(2020, 2, 24)
    add_records(store, hourly_records(TT_KEY, day, {9: [10.0]}))
    window = (datetime(2020, 2, 24, tzinfo=SEA), datetime(2020, 2, 25, tzinfo=SEA))
    result = reliability(store, TT_KEY, *window)
    assert result.n == 1
    assert result.std_dev is None


def test_reliability_matches_two_pass_oracle(store):
    rng = random.Random(31)
    day = date(2020, 2, 24)
    shape = {h: [rng.uniform(5, 30) for _ in range(3)] for h in range(24)}
    add_records(store, hourly_records(TT_KEY, day, shape))
    window = (datetime(2020, 2, 24, tzinfo=SEA), datetime(2020, 2, 25, tzinfo=SEA))
    result = reliability(store, TT_KEY, *window, day_start=7, day_end=19)

    daytime = [v for h in range(7, 19) for v in shape[h]]
    mean = sum(daytime) / len(daytime)
    oracle = math.sqrt(sum((v - mean) ** 2 for v in daytime) / (len(daytime) - 1))
    assert result.std_dev == pytest.approx(oracle, rel=1e-9)


def test_reliability_custom_daytime_window(store):
    day = date(2020, 2, 24)
    add_records(store, hourly_records(TT_KEY, day, {6: [10.0], 7: [20.0], 8: [30.0]}))
    window = (datetime(2020, 2, 24, tzinfo=SEA), datetime(2020, 2, 25, tzinfo=SEA))
    assert reliability(store, TT_KEY, *window, day_start=6, day_end=9).n == 3
    assert reliability(store, TT_KEY, *window, day_start=7, day_end=8).n == 1


# -- speeding share --------------------------------------------------------


def seed_speeding_fixture(store):
    """145 segments: 12 above 25 mph, 29 more above 20, 104 slow."""
    records = []
    base = datetime(2020, 4, 15, 8, 0, tzinfo=zone_for("nyc"))
    means = [27.0] * 12 + [22.0] * 29 + [15.0] * 104
    for i, mean in enumerate(means):
        for k in range(4):
            records.append(
                TimeSeriesRecord(
                    "nyc",
                    MetricKind.SPEED,
                    f"seg{i:03d}",
                    base + timedelta(minutes=15 * k),
                    mean + (0.5 if k % 2 else -0.5),
                )
            )
    add_records(store, records)
    return base


def test_speeding_share_over_25(store):
    base = seed_speeding_fixture(store)
    result = speeding_share(store, "nyc", base, base + timedelta(hours=1), limit_mph=25.0)
    assert result.total == 145
    assert result.over == 12
    assert result.share == pytest.approx(12 / 145)
    assert round(result.share * 1000) / 10 == 8.3  # 8.3% of the 145 segments


def test_speeding_share_monotone_in_limit(store):
    base = seed_speeding_fixture(store)
    shares = [
        speeding_share(store, "nyc", base, base + timedelta(hours=1), limit_mph=limit).share
        for limit in (10.0, 20.0, 25.0, 40.0)
    ]
    assert shares == sorted(shares, reverse=True)
    assert shares[1] == pytest.approx(41 / 145)  # 28% of segments over 20 mph
    assert shares[3] == 0.0


def test_speeding_share_excludes_no_data_segments(store):
    base = seed_speeding_fixture(store)
    result = speeding_share(
        store,
        "nyc",
        base,
        base + timedelta(hours=1),
        limit_mph=25.0,
        segments=["seg000", "ghost"],
    )
    assert result.total == 1
    assert result.no_data == ("ghost",)


def test_speeding_share_no_segments_at_all(store):
    result = speeding_share(
        store, "nyc", datetime(2020, 1, 1, tzinfo=UTC), datetime(2020, 1, 2, tzinfo=UTC)
    )
    assert result.share is None
    assert result.total == 0


# -- fatality rate -----------------------------------------------------


def seed_fatality_fixture(store):
    records = []
    start = date(2020, 4, 1)
    crash_daily = [238] * 20 + [240]  # sums to 5000
    fatal_daily = [1] * 7 + [0] * 14  # sums to 7
    for i in range(21):
        ts = datetime.combine(start + timedelta(days=i), datetime.min.time(), tzinfo=zone_for("nyc")) + timedelta(hours=12)
        records.append(TimeSeriesRecord("nyc", MetricKind.CRASH_COUNT, "citywide", ts, float(crash_daily[i])))
        records.append(TimeSeriesRecord("nyc", MetricKind.FATALITY_COUNT, "citywide", ts, float(fatal_daily[i])))
    add_records(store, records)


def test_fatality_rate_exact(store):
    seed_fatality_fixture(store)
    window = (datetime(2020, 4, 1, tzinfo=UTC), datetime(2020, 4, 23, tzinfo=UTC))
    result = fatality_rate(store, "nyc", *window)
    assert result.crashes == 5000
    assert result.fatalities == 7
    assert result.rate_per_1000 == 1.4


def test_fatality_rate_zero_fatalities(store):
    seed_fatality_fixture(store)
    # last 14 days of the fixture have zero fatalities
    window = (datetime(2020, 4, 9, tzinfo=zone_for("nyc")), datetime(2020, 4, 23, tzinfo=UTC))
    result = fatality_rate(store, "nyc", *window)
    assert result.fatalities == 0
    assert result.rate_per_1000 == 0.0


def test_fatality_rate_zero_crashes_undefined(store):
    seed_fatality_fixture(store)
    window = (datetime(2021, 1, 1, tzinfo=UTC), datetime(2021, 2, 1, tzinfo=UTC))
    result = fatality_rate(store, "nyc", *window)
    assert result.rate_per_1000 is None
    assert result.to_json()["defined"] is False


# -- GVW bins ------------------------------------------------------------


GVW_KEY = SeriesKey("nyc", MetricKind.TRUCK_GVW, "qb_wim")


def gvw_records(values, start):
    return [
        TimeSeriesRecord("nyc", MetricKind.TRUCK_GVW, "qb_wim", start + timedelta(minutes=7 * i), v)
        for i, v in enumerate(values)
    ]


def test_gvw_boundary_is_exclusive_below_100(store):
    start = datetime(2020, 2, 3, tzinfo=UTC)
    add_records(store, gvw_records([50.0, 99.9, 100.1, 140.0], start))
    hist = gvw_bins(store, GVW_KEY, start, start + timedelta(days=1), edges=(0.0, 100.0))
    assert hist.labels == ("0-100", ">100")
    assert hist.counts == (2, 2)


def test_gvw_empty_window_all_zero(store):
    hist = gvw_bins(
        store, GVW_KEY, datetime(2020, 1, 1, tzinfo=UTC), datetime(2020, 1, 2, tzinfo=UTC)
    )
    assert hist.counts == (0, 0, 0, 0)
    assert hist.total == 0


def test_gvw_default_bins_and_sum_property(store):
    rng = random.Random(77)
    start = datetime(2020, 2, 3, tzinfo=UTC)
    values = [rng.uniform(0.1, 150.0) for _ in range(300)]
    add_records(store, gvw_records(values, start))
    hist = gvw_bins(store, GVW_KEY, start, start + timedelta(days=30))
    assert sum(hist.counts) == 300
    assert hist.labels == ("0-10", "10-26", "26-100", ">100")


def test_gvw_heavy_truck_delta_minus_30_pct(store):
    window_a_start = datetime(2020, 2, 3, tzinfo=UTC)
    window_b_start = datetime(2020, 3, 13, tzinfo=UTC)
    heavy_a = [110.0 + (i % 40) for i in range(100)]
    light_a = [30.0 + (i % 50) for i in range(50)]
    heavy_b = [112.0 + (i % 35) for i in range(70)]  # 30% fewer very heavy trucks
    light_b = [28.0 + (i % 45) for i in range(50)]
    add_records(store, gvw_records(heavy_a + light_a, window_a_start))
    add_records(store, gvw_records(heavy_b + light_b, window_b_start))
    deltas = gvw_bin_deltas(
        store,
        GVW_KEY,
        (window_b_start, datetime(2020, 4, 12, tzinfo=UTC)),
        (window_a_start, window_b_start),
    )
    heavy = next(d for d in deltas if d["bin"] == ">100")
    assert heavy["pctChange"] == pytest.approx(-30.0)


def test_gvw_rejects_bad_edges(store):
    with pytest.raises(ValueError):
        gvw_bins(store, GVW_KEY, datetime(2020, 1, 1, tzinfo=UTC), datetime(2020, 1, 2, tzinfo=UTC), edges=(10.0, 5.0))
    with pytest.raises(ValueError):
        gvw_bins(store, GVW_KEY, datetime(2020, 1, 1, tzinfo=UTC), datetime(2020, 1, 2, tzinfo=UTC), edges=(5.0, 10.0))


# -- scenario comparison -------------------------------------------------


def test_compare_windows(store):
    seed_volume_fixture(store)
    left = local_range(WEEKS_2020[0])
    right = local_range(WEEKS_2020[3])
    result = compare_windows(store, VOLUME_KEY, left, right, agg="sum")
    assert result["left"]["value"] == pytest.approx(5309)
    assert result["right"]["value"] == pytest.approx(7369)
    assert result["pctChange"] == pytest.approx(100 * (7369 - 5309) / 5309)


def local_range(week):
    from citypulse.core import local_week_range

    return local_week_range(week, "seattle")
