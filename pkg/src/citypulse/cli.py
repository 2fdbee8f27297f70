"""Operator command line: ingest, replay, comply, report, serve, verify.

Conventions: stdout carries machine-parseable output (JSON or CSV),
diagnostics go to stderr, and exit codes are stable: 0 success/accept,
2 quarantined batch, 1 error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

from .api import DashboardApi, make_server
from .config import ConfigError, PlatformConfig, load_config, parse_duration
from .core import MetricKind, SeriesKey, WeekKey, parse_rfc3339, zone_for
from .ingestion import (
    FeedDescriptor,
    IngestError,
    dispatch,
    evaluate_batch,
    parse_batch,
)
from .metrics import (
    DEFAULT_GVW_EDGES,
    FIXED_REFERENCE,
    PRIOR_YEAR,
    BaselineSpec,
    fatality_rate,
    gvw_bin_deltas,
    gvw_bins,
    hourly_profile,
    reliability,
    speeding_share,
    weekly_delta,
)
from .sociability import EmptyWindow, ProjectionParams, analyze_frame, summarize
from .warehouse import Warehouse, WarehouseError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_QUARANTINE = 2


def _err(message: str) -> None:
    print(message, file=sys.stderr)


def _parse_when(text: str, city: str = "") -> datetime:
    """RFC-3339 instant; a bare date means local midnight in the city."""
    if len(text) == 10:
        d = date.fromisoformat(text)
        return datetime(d.year, d.month, d.day, tzinfo=zone_for(city))
    return parse_rfc3339(text)


def _batch_id_for(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# -- ingest ---------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    descriptor = config.feed(args.feed)
    path = Path(args.input)
    if not path.is_file():
        _err(f"input file not found: {path}")
        return EXIT_ERROR
    batch_id = args.batch_id or _batch_id_for(path)
    now = parse_rfc3339(args.as_of) if args.as_of else datetime.now(timezone.utc)

    parsed = parse_batch(descriptor, path.read_bytes())
    report = evaluate_batch(descriptor, parsed, batch_id, now, config.thresholds)
    with Warehouse(args.warehouse, writer=True) as store:
        result = dispatch(report, parsed, store)
    doc = report.to_json()
    doc["dispatch"] = {
        "appended": result.appended,
        "appendResult": result.append_result,
        "quarantined": result.quarantined,
    }
    print(json.dumps(doc, indent=2))
    if report.verdict == "accept":
        return EXIT_OK
    return EXIT_QUARANTINE


# -- replay ---------------------------------------------------------------


def cmd_replay(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    directory = Path(args.dir)
    if not directory.is_dir():
        _err(f"not a directory: {directory}")
        return EXIT_ERROR

    batches = []
    for path in sorted(directory.iterdir()):
        if path.suffix not in (".csv", ".ndjson") or "__" not in path.name:
            continue
        feed_id = path.name.split("__", 1)[0]
        try:
            descriptor = config.feed(feed_id)
        except ConfigError:
            _err(f"skipping {path.name}: no feed {feed_id!r} in config")
            continue
        parsed = parse_batch(descriptor, path.read_bytes())
        stamps = [r.ts for r in parsed.records] + [f.captured_at for f in parsed.frames]
        start = min(stamps) if stamps else None
        end = max(stamps) if stamps else None
        batches.append((start, end, path, descriptor, parsed))

    batches.sort(key=lambda b: (b[0] is None, b[0]))
    speed = args.speed
    failures = 0
    with Warehouse(args.warehouse, writer=True) as store:
        previous_start = None
        for start, end, path, descriptor, parsed in batches:
            if speed > 0 and previous_start is not None and start is not None:
                gap = (start - previous_start).total_seconds() / speed
                if gap > 0:
                    time.sleep(min(gap, args.max_sleep))
            previous_start = start or previous_start
            batch_id = _batch_id_for(path)
            now = (end + timedelta(seconds=1)) if end else datetime.now(timezone.utc)
            report = evaluate_batch(descriptor, parsed, batch_id, now, config.thresholds)
            result = dispatch(report, parsed, store)
            if report.verdict != "accept":
                failures += 1
            print(
                json.dumps(
                    {
                        "file": path.name,
                        "feedId": descriptor.feed_id,
                        "batchId": batch_id,
                        "verdict": report.verdict,
                        "accepted": report.accepted,
                        "rejected": report.rejected,
                        "appendResult": result.append_result,
                    }
                )
            )
    return EXIT_OK if failures == 0 else EXIT_QUARANTINE


# -- comply ---------------------------------------------------------------


def cmd_comply(args: argparse.Namespace) -> int:
    path = Path(args.input)
    if not path.is_file():
        _err(f"input file not found: {path}")
        return EXIT_ERROR
    params = ProjectionParams(
        assumed_height_m=args.height_m,
        distance_threshold_m=args.threshold_m,
        confidence_cutoff=args.conf,
        min_box_height_px=args.min_box_h,
    )
    descriptor = FeedDescriptor(
        feed_id="comply",
        city="*",
        metric=None,
        format="ndjson",
        cadence=timedelta(seconds=30),
        confidence_cutoff=args.conf,
    )
    parsed = parse_batch(descriptor, path.read_bytes())
    for raw, reason in parsed.rejects:
        _err(f"reject ({reason}): {raw[:120]}")
    if not parsed.frames:
        _err("no valid frames in input")
        return EXIT_ERROR

    results = [analyze_frame(frame, params) for frame in parsed.frames]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    with open(out_dir / "frames.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["camera", "captured_at", "person_count", "car", "truck", "bicycle", "bus",
             "violated_pairs", "violating_persons", "compliance_rate", "degenerate_boxes"]
        )
        for r in results:
            writer.writerow(
                [
                    r.camera,
                    r.captured_at.isoformat(),
                    r.person_count,
                    r.counts_by_class["car"],
                    r.counts_by_class["truck"],
                    r.counts_by_class["bicycle"],
                    r.counts_by_class["bus"],
                    r.violated_pairs,
                    r.violating_persons,
                    "" if r.compliance_rate is None else f"{r.compliance_rate:.6f}",
                    r.degenerate_boxes,
                ]
            )

    window = (min(r.captured_at for r in results), max(r.captured_at for r in results))
    try:
        summary = summarize(results, *window)
    except EmptyWindow:  # unreachable: frames is non-empty
        return EXIT_ERROR
    doc = summary.to_json()
    doc["params"] = {
        "assumedHeightM": params.assumed_height_m,
        "distanceThresholdM": params.distance_threshold_m,
        "confidenceCutoff": params.confidence_cutoff,
        "minBoxHeightPx": params.min_box_height_px,
    }
    doc["rejectedLines"] = len(parsed.rejects)
    (out_dir / "summary.json").write_text(json.dumps(doc, indent=2) + "\n")
    print(json.dumps(doc, indent=2))
    return EXIT_OK


# -- report ---------------------------------------------------------------


def _emit(args, header: list[str], rows: list[list], json_doc: dict) -> None:
    if args.format == "json":
        print(json.dumps(json_doc, indent=2))
        return
    writer = csv.writer(sys.stdout)
    writer.writerow(header)
    writer.writerows(rows)


def _fmt(value, places=2) -> str:
    return "" if value is None else f"{value:.{places}f}"


def cmd_report(args: argparse.Namespace) -> int:
    with Warehouse(args.warehouse, create=False) as store:
        return _report(args, store)


def _report(args: argparse.Namespace, store: Warehouse) -> int:
    kind = args.report_kind
    if kind == "weekly":
        metric = MetricKind(args.metric)
        weeks = [WeekKey.parse(w.strip()) for w in args.weeks.split(",")]
        if args.baseline == "prior_year":
            baseline = BaselineSpec(PRIOR_YEAR)
        elif args.baseline.startswith("ref:"):
            baseline = BaselineSpec(FIXED_REFERENCE, WeekKey.parse(args.baseline[4:]))
        else:
            _err("baseline must be prior_year or ref:YYYY-MM-DD")
            return EXIT_ERROR
        cadence = parse_duration(args.cadence) if args.cadence else None
        deltas = weekly_delta(
            store,
            SeriesKey(args.city, metric, args.location),
            weeks,
            baseline,
            args.agg,
            expected_cadence=cadence,
        )
        rows = [
            [str(d.week), _fmt(d.pct_change), _fmt(d.current), _fmt(d.baseline),
             d.n_current, d.n_baseline, d.status]
            for d in deltas
        ]
        _emit(args,
              ["week", "pct_change", "current", "baseline", "n_current", "n_baseline", "status"],
              rows, {"deltas": [d.to_json() for d in deltas]})
        return EXIT_OK

    if kind == "profile":
        profile = hourly_profile(
            store,
            SeriesKey(args.city, MetricKind(args.metric), args.location),
            date.fromisoformat(args.day),
        )
        rows = [
            [hour, _fmt(profile.values[hour], 4), profile.sample_counts[hour]]
            for hour in range(24)
        ]
        _emit(args, ["hour", "value", "samples"], rows, profile.to_json())
        return EXIT_OK

    if kind == "reliability":
        result = reliability(
            store,
            SeriesKey(args.city, MetricKind.TRAVEL_TIME, args.location),
            _parse_when(args.from_ts, args.city),
            _parse_when(args.to_ts, args.city),
            args.day_start,
            args.day_end,
        )
        rows = [[result.from_ts.isoformat(), result.to_ts.isoformat(),
                 _fmt(result.std_dev), _fmt(result.mean), result.n]]
        _emit(args, ["from", "to", "std_dev", "mean", "n"], rows, result.to_json())
        return EXIT_OK

    if kind == "speeding":
        result = speeding_share(
            store,
            args.city,
            _parse_when(args.from_ts, args.city),
            _parse_when(args.to_ts, args.city),
            args.limit,
            args.segments.split(",") if args.segments else None,
        )
        rows = [[_fmt(result.share, 6), result.over, result.total, _fmt(result.limit_mph),
                 len(result.no_data)]]
        _emit(args, ["share", "over", "total", "limit_mph", "no_data_segments"],
              rows, result.to_json())
        return EXIT_OK

    if kind == "fatality":
        result = fatality_rate(
            store,
            args.city,
            _parse_when(args.from_ts, args.city),
            _parse_when(args.to_ts, args.city),
        )
        rows = [[_fmt(result.rate_per_1000, 4), _fmt(result.fatalities, 1),
                 _fmt(result.crashes, 1)]]
        _emit(args, ["rate_per_1000", "fatalities", "crashes"], rows, result.to_json())
        return EXIT_OK

    if kind == "gvw":
        edges = (
            tuple(float(e) for e in args.edges.split(",")) if args.edges else DEFAULT_GVW_EDGES
        )
        key = SeriesKey(args.city, MetricKind.TRUCK_GVW, args.location)
        window = (_parse_when(args.from_ts, args.city), _parse_when(args.to_ts, args.city))
        histogram = gvw_bins(store, key, *window, edges=edges)
        doc: dict = {"histogram": histogram.to_json()}
        if args.baseline_from and args.baseline_to:
            baseline_window = (
                _parse_when(args.baseline_from, args.city),
                _parse_when(args.baseline_to, args.city),
            )
            deltas = gvw_bin_deltas(store, key, window, baseline_window, edges=edges)
            doc["deltas"] = deltas
            rows = [
                [d["bin"], d["current"], d["baseline"], _fmt(d["pctChange"])] for d in deltas
            ]
            _emit(args, ["bin", "count", "baseline", "pct_change"], rows, doc)
        else:
            rows = [[label, count] for label, count in zip(histogram.labels, histogram.counts)]
            _emit(args, ["bin", "count"], rows, doc)
        return EXIT_OK

    _err(f"unknown report kind {kind!r}")
    return EXIT_ERROR


# -- serve / verify ---------------------------------------------------------


def cmd_serve(args: argparse.Namespace) -> int:
    config = load_config(args.config) if args.config else PlatformConfig()
    host, _, port_text = args.listen.rpartition(":")
    with Warehouse(args.warehouse, create=False) as store:
        server = make_server(DashboardApi(store, config), host or "127.0.0.1", int(port_text))
        actual = server.server_address
        _err(f"serving on http://{actual[0]}:{actual[1]} (warehouse {args.warehouse})")
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            server.server_close()
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    with Warehouse(args.warehouse, create=False) as store:
        result = store.verify()
    print(json.dumps(result.to_json(), indent=2))
    return EXIT_OK if result.ok else EXIT_ERROR


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="citypulse",
        description="Urban mobility and sociability analytics platform.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse, quality-gate, and store one feed batch")
    p.add_argument("--config", required=True, help="platform config file")
    p.add_argument("--feed", required=True, help="feed id from the config")
    p.add_argument("--input", required=True, help="batch file (csv or ndjson)")
    p.add_argument("--warehouse", required=True, help="warehouse directory")
    p.add_argument("--batch-id", help="override the content-hash batch id")
    p.add_argument("--as-of", help="evaluation time (RFC-3339); default: now")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("replay", help="replay recorded feed files in timestamp order")
    p.add_argument("--config", required=True)
    p.add_argument("--dir", required=True, help="directory of <feed>__*.csv/.ndjson files")
    p.add_argument("--warehouse", required=True)
    p.add_argument("--speed", type=float, default=0.0,
                   help="time compression factor; 0 replays as fast as possible")
    p.add_argument("--max-sleep", type=float, default=5.0,
                   help="cap on the pause between batches, seconds")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("comply", help="social-distancing analysis of a detection file")
    p.add_argument("--input", required=True, help="detection ndjson file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threshold-m", type=float, default=1.8288)
    p.add_argument("--height-m", type=float, default=1.70)
    p.add_argument("--min-box-h", type=float, default=8.0)
    p.add_argument("--conf", type=float, default=0.5)
    p.set_defaults(func=cmd_comply)

    p = sub.add_parser("report", help="compute a metric from the warehouse")
    report_sub = p.add_subparsers(dest="report_kind", required=True)

    def common(sp, *, location=True, window=False):
        sp.add_argument("--warehouse", required=True)
        sp.add_argument("--city", required=True)
        if location:
            sp.add_argument("--location", required=True)
        if window:
            sp.add_argument("--from", dest="from_ts", required=True)
            sp.add_argument("--to", dest="to_ts", required=True)
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.set_defaults(func=cmd_report)

    sp = report_sub.add_parser("weekly", help="weekly deltas vs baseline")
    common(sp)
    sp.add_argument("--metric", required=True)
    sp.add_argument("--weeks", required=True, help="comma list of Monday dates")
    sp.add_argument("--baseline", default="prior_year", help="prior_year or ref:YYYY-MM-DD")
    sp.add_argument("--agg", choices=("sum", "mean"), default=None)
    sp.add_argument("--cadence", help="feed cadence (e.g. 1d) for the coverage gate")

    sp = report_sub.add_parser("profile", help="hourly profile of one day")
    common(sp)
    sp.add_argument("--metric", required=True)
    sp.add_argument("--day", required=True)

    sp = report_sub.add_parser("reliability", help="daytime travel-time deviation")
    common(sp, window=True)
    sp.add_argument("--day-start", type=int, default=7)
    sp.add_argument("--day-end", type=int, default=19)

    sp = report_sub.add_parser("speeding", help="share of segments above a limit")
    common(sp, location=False, window=True)
    sp.add_argument("--limit", type=float, default=25.0)
    sp.add_argument("--segments", help="comma list; default: all speed series")

    sp = report_sub.add_parser("fatality", help="fatalities per 1000 crashes")
    common(sp, location=False, window=True)

    sp = report_sub.add_parser("gvw", help="gross-vehicle-weight histogram")
    common(sp, window=True)
    sp.add_argument("--edges", help="comma bin edges, default 0,10,26,100")
    sp.add_argument("--baseline-from", dest="baseline_from")
    sp.add_argument("--baseline-to", dest="baseline_to")

    p = sub.add_parser("serve", help="run the dashboard HTTP API")
    p.add_argument("--listen", default="127.0.0.1:8080")
    p.add_argument("--config")
    p.add_argument("--warehouse", required=True)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("verify", help="check warehouse checksums and ledger")
    p.add_argument("--warehouse", required=True)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, IngestError, WarehouseError, ValueError) as exc:
        _err(f"error: {exc}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
