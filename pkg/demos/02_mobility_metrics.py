"""Compute every mobility-board statistic from the demo warehouse.

Ingests the bundled dataset, then reads back weekly baseline deltas,
the critical-day hourly profiles, daytime travel-time reliability,
the speeding-segment share, the fatality rate, and the GVW histogram.
"""

import tempfile
from datetime import date
from pathlib import Path

from citypulse.config import load_config
from citypulse.core import MetricKind, SeriesKey, WeekKey, local_week_range, zone_for
from citypulse.fixtures import SEATTLE_WEEKS, build_fixture_dataset
from citypulse.ingestion import dispatch, evaluate_batch, parse_batch
from citypulse.metrics import (
    PRIOR_YEAR,
    BaselineSpec,
    fatality_rate,
    gvw_bin_deltas,
    hourly_profile,
    reliability,
    speeding_share,
    weekly_delta,
)
from citypulse.warehouse import Warehouse

workdir = Path(tempfile.mkdtemp(prefix="citypulse_demo_"))
dataset = build_fixture_dataset(workdir / "feeds")
config = load_config(dataset.config_path)

store = Warehouse(workdir / "warehouse", writer=True)
for f in dataset.files:
    descriptor = config.feed(f.feed_id)
    parsed = parse_batch(descriptor, f.path.read_bytes())
    report = evaluate_batch(descriptor, parsed, f.path.name, f.as_of, config.thresholds)
    dispatch(report, parsed, store)

volume_key = SeriesKey("seattle", MetricKind.TRAFFIC_VOLUME, "i5_downtown")
print("== weekly traffic volume vs same week of prior year")
for d in weekly_delta(store, volume_key, list(SEATTLE_WEEKS), BaselineSpec(PRIOR_YEAR), "sum"):
    print(f"  week of {d.week}: {d.pct_change:+.2f}%  ({d.current:.0f} vs {d.baseline:.0f})")

tt_key = SeriesKey("seattle", MetricKind.TRAVEL_TIME, "i5_downtown")
print("\n== travel-time reliability (daytime 7-19h standard deviation)")
for week in (WeekKey(date(2020, 2, 24)), WeekKey(date(2020, 4, 27))):
    window = local_week_range(week, "seattle")
    r = reliability(store, tt_key, *window)
    print(f"  week of {week}: std {r.std_dev:.2f} min over {r.n} samples (mean {r.mean:.1f})")

profile_key = SeriesKey("seattle", MetricKind.TRAVEL_TIME, "i5_greenlake")
print("\n== critical-day profiles (commute peaks vanish after the order)")
for day in (date(2020, 2, 28), date(2020, 3, 24)):
    p = hourly_profile(store, profile_key, day)
    bars = " ".join(f"{v:.0f}" if v else "." for v in p.values)
    print(f"  {day}: {bars}")

zone = zone_for("nyc")
from datetime import datetime

apr15 = (datetime(2020, 4, 15, tzinfo=zone), datetime(2020, 4, 16, tzinfo=zone))
print("\n== speeding share on 145 local segments (morning of Apr 15)")
for limit in (25.0, 20.0):
    s = speeding_share(store, "nyc", *apr15, limit_mph=limit)
    print(f"  over {limit:.0f} mph: {s.over}/{s.total} segments = {100 * s.share:.1f}%")

window = (datetime(2020, 4, 1, tzinfo=zone), datetime(2020, 4, 23, tzinfo=zone))
f = fatality_rate(store, "nyc", *window)
print(f"\n== fatality rate: {f.rate_per_1000} per 1000 crashes "
      f"({f.fatalities:.0f} fatalities / {f.crashes:.0f} crashes)")

gvw_key = SeriesKey("nyc", MetricKind.TRUCK_GVW, "qb_wim")
print("\n== freight by gross vehicle weight, window B vs window A")
deltas = gvw_bin_deltas(
    store,
    gvw_key,
    (datetime(2020, 3, 13, tzinfo=zone), datetime(2020, 4, 12, tzinfo=zone)),
    (datetime(2020, 2, 3, tzinfo=zone), datetime(2020, 3, 13, tzinfo=zone)),
)
for d in deltas:
    pct = "n/a" if d["pctChange"] is None else f"{d['pctChange']:+.1f}%"
    print(f"  {d['bin']:>8} kips: {d['baseline']:>4} -> {d['current']:>4}  ({pct})")

store.close()
