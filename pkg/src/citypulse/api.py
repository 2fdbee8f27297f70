"""Read-only HTTP/JSON API over the warehouse and metric operations.

Every endpoint is idempotent; responses for identical query strings are
memoized until the warehouse high-water mark moves. All error bodies share
one schema: {"error": {"code", "message", "details"?}} with code one of
bad_request, not_found, no_data, internal.

Route behavior for unknown identifiers is deliberately uniform: unknown
paths are 404; unknown cities, locations, or cameras inside a known route
return 200 with empty results or no_data markers (an unknown series is an
empty series, not an error).
"""

from __future__ import annotations

import json
import threading
from collections import OrderedDict
from datetime import date, datetime
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qsl, urlparse
from zoneinfo import ZoneInfo

from . import __version__
from .config import PlatformConfig
from .core import MetricKind, SeriesKey, WeekKey, parse_rfc3339, zone_for
from .metrics import (
    DEFAULT_GVW_EDGES,
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
from .sociability import analyze_frame, summarize
from .warehouse import Warehouse


class ApiBadRequest(Exception):
    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.details = details or {}


def _error_body(code: str, message: str, details: dict | None = None) -> dict:
    error: dict = {"code": code, "message": message}
    if details:
        error["details"] = details
    return {"error": error}


class _Params:
    """Query-parameter accessor with typed, validated getters."""

    def __init__(self, pairs: list[tuple[str, str]]):
        self._map = dict(pairs)

    def get(self, name: str, default: str | None = None) -> str | None:
        return self._map.get(name, default)

    def require(self, name: str) -> str:
        value = self._map.get(name)
        if value is None or value == "":
            raise ApiBadRequest(f"missing required parameter {name!r}")
        return value

    def timestamp(self, name: str, city: str) -> datetime:
        """RFC-3339 instant, or a bare date meaning local midnight in the city."""
        raw = self.require(name)
        try:
            if len(raw) == 10:
                d = date.fromisoformat(raw)
                return datetime(d.year, d.month, d.day, tzinfo=zone_for(city))
            return parse_rfc3339(raw)
        except ValueError as exc:
            raise ApiBadRequest(f"bad timestamp in {name!r}: {exc}") from None

    def window(self, city: str, from_name: str = "from", to_name: str = "to"):
        from_ts = self.timestamp(from_name, city)
        to_ts = self.timestamp(to_name, city)
        if not from_ts < to_ts:
            raise ApiBadRequest(f"{from_name} must be earlier than {to_name}")
        zone = zone_for(city)
        return from_ts.astimezone(zone), to_ts.astimezone(zone)

    def metric(self, name: str = "metric") -> MetricKind:
        raw = self.require(name)
        try:
            return MetricKind(raw)
        except ValueError:
            raise ApiBadRequest(f"unknown metric {raw!r}") from None

    def weeks(self, name: str = "weeks") -> list[WeekKey]:
        out = []
        for token in self.require(name).split(","):
            try:
                out.append(WeekKey.parse(token.strip()))
            except ValueError as exc:
                raise ApiBadRequest(f"bad week {token!r}: {exc}") from None
        return out

    def baseline(self, name: str = "baseline") -> BaselineSpec:
        raw = self.get(name, "prior_year")
        if raw == "prior_year":
            return BaselineSpec(PRIOR_YEAR)
        if raw.startswith("ref:"):
            try:
                return BaselineSpec(FIXED_REFERENCE, WeekKey.parse(raw[4:]))
            except ValueError as exc:
                raise ApiBadRequest(f"bad baseline reference week: {exc}") from None
        raise ApiBadRequest(f"baseline must be prior_year or ref:YYYY-MM-DD, got {raw!r}")

    def number(self, name: str, default: float) -> float:
        raw = self.get(name)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ApiBadRequest(f"{name} must be a number") from None

    def integer(self, name: str, default: int, lo: int | None = None, hi: int | None = None) -> int:
        raw = self.get(name)
        if raw is None:
            value = default
        else:
            try:
                value = int(raw)
            except ValueError:
                raise ApiBadRequest(f"{name} must be an integer") from None
        if lo is not None and value < lo or hi is not None and value > hi:
            raise ApiBadRequest(f"{name} out of range")
        return value


class DashboardApi:
    """Route handlers, independent of the HTTP plumbing (testable directly)."""

    def __init__(self, store: Warehouse, config: PlatformConfig | None = None):
        self.store = store
        self.config = config or PlatformConfig()
        self._cache: OrderedDict[tuple, bytes] = OrderedDict()
        self._cache_lock = threading.Lock()
        self.routes = {
            "/healthz": self.healthz,
            "/v1/cities": self.cities,
            "/v1/metrics/weekly": self.metrics_weekly,
            "/v1/metrics/profile": self.metrics_profile,
            "/v1/metrics/reliability": self.metrics_reliability,
            "/v1/metrics/speeding": self.metrics_speeding,
            "/v1/metrics/fatality-rate": self.metrics_fatality_rate,
            "/v1/metrics/gvw": self.metrics_gvw,
            "/v1/sociability/summary": self.sociability_summary,
            "/v1/sociability/frames": self.sociability_frames,
            "/v1/compare": self.compare,
        }

    # -- plumbing ------------------------------------------------------

    def respond(self, path: str, query: str) -> tuple[int, bytes]:
        """Dispatch one GET; returns (status, canonical JSON bytes)."""
        handler = self.routes.get(path)
        if handler is None:
            return 404, self._dump(_error_body("not_found", f"no route {path}"))
        cache_key = (path, query, self.store.high_water())
        with self._cache_lock:
            hit = self._cache.get(cache_key)
        if hit is not None:
            return 200, hit
        params = _Params(parse_qsl(query, keep_blank_values=True))
        try:
            body = handler(params)
        except ApiBadRequest as exc:
            return 400, self._dump(_error_body("bad_request", str(exc), exc.details))
        except Exception as exc:  # pragma: no cover - defensive
            return 500, self._dump(_error_body("internal", f"{type(exc).__name__}: {exc}"))
        payload = self._dump(body)
        with self._cache_lock:
            self._cache[cache_key] = payload
            while len(self._cache) > 512:
                self._cache.popitem(last=False)
        return 200, payload

    @staticmethod
    def _dump(body: dict) -> bytes:
        return json.dumps(body, sort_keys=True, separators=(",", ":")).encode()

    # -- endpoints -----------------------------------------------------

    def healthz(self, params: _Params) -> dict:
        return {
            "status": "ok",
            "version": __version__,
            "warehouseHighWater": self.store.high_water(),
        }

    def cities(self, params: _Params) -> dict:
        by_city: dict[str, dict] = {}
        for info in self.store.list_series():
            entry = by_city.setdefault(info.key.city, {"metrics": [], "cameras": []})
            entry["metrics"].append(info.to_json())
        for cam in self.store.list_cameras():
            entry = by_city.setdefault(cam.city, {"metrics": [], "cameras": []})
            entry["cameras"].append(cam.to_json())
        return {
            "cities": [
                {"city": city, **by_city[city]} for city in sorted(by_city)
            ]
        }

    def metrics_weekly(self, params: _Params) -> dict:
        city = params.require("city")
        metric = params.metric()
        location = params.require("location")
        weeks = params.weeks()
        baseline = params.baseline()
        agg = params.get("agg")
        if agg not in (None, "sum", "mean"):
            raise ApiBadRequest("agg must be sum or mean")
        key = SeriesKey(city, metric, location)
        deltas = weekly_delta(
            self.store,
            key,
            weeks,
            baseline,
            agg,
            expected_cadence=self.config.cadence_for(city, metric),
        )
        baseline_doc: dict = {"mode": baseline.mode}
        if baseline.reference_week is not None:
            baseline_doc["referenceWeek"] = str(baseline.reference_week)
        return {
            "city": city,
            "metric": metric.value,
            "location": location,
            "baseline": baseline_doc,
            "deltas": [d.to_json() for d in deltas],
        }

    def metrics_profile(self, params: _Params) -> dict:
        city = params.require("city")
        metric = params.metric()
        location = params.require("location")
        try:
            day = date.fromisoformat(params.require("day"))
        except ValueError as exc:
            raise ApiBadRequest(f"bad day: {exc}") from None
        profile = hourly_profile(self.store, SeriesKey(city, metric, location), day)
        return {"city": city, "metric": metric.value, "location": location,
                **profile.to_json()}

    def metrics_reliability(self, params: _Params) -> dict:
        city = params.require("city")
        location = params.require("location")
        from_ts, to_ts = params.window(city)
        day_start = params.integer("dayStart", 7, lo=0, hi=24)
        day_end = params.integer("dayEnd", 19, lo=0, hi=24)
        if day_start >= day_end:
            raise ApiBadRequest("dayStart must be earlier than dayEnd")
        key = SeriesKey(city, MetricKind.TRAVEL_TIME, location)
        result = reliability(self.store, key, from_ts, to_ts, day_start, day_end)
        return {"city": city, "location": location, **result.to_json()}

    def metrics_speeding(self, params: _Params) -> dict:
        city = params.require("city")
        from_ts, to_ts = params.window(city)
        limit = params.number("limit", 25.0)
        segments_raw = params.get("segments")
        segments = segments_raw.split(",") if segments_raw else None
        result = speeding_share(self.store, city, from_ts, to_ts, limit, segments)
        return {"city": city, "from": from_ts.isoformat(), "to": to_ts.isoformat(),
                **result.to_json()}

    def metrics_fatality_rate(self, params: _Params) -> dict:
        city = params.require("city")
        from_ts, to_ts = params.window(city)
        result = fatality_rate(self.store, city, from_ts, to_ts)
        return {"city": city, "from": from_ts.isoformat(), "to": to_ts.isoformat(),
                **result.to_json()}

    def metrics_gvw(self, params: _Params) -> dict:
        city = params.require("city")
        location = params.require("location")
        from_ts, to_ts = params.window(city)
        edges_raw = params.get("edges")
        if edges_raw:
            try:
                edges = tuple(float(e) for e in edges_raw.split(","))
            except ValueError:
                raise ApiBadRequest("edges must be comma-separated numbers") from None
        else:
            edges = DEFAULT_GVW_EDGES
        key = SeriesKey(city, MetricKind.TRUCK_GVW, location)
        try:
            histogram = gvw_bins(self.store, key, from_ts, to_ts, edges=edges)
        except ValueError as exc:
            raise ApiBadRequest(str(exc)) from None
        body = {
            "city": city,
            "location": location,
            "from": from_ts.isoformat(),
            "to": to_ts.isoformat(),
            "histogram": histogram.to_json(),
            "deltas": None,
        }
        if params.get("baselineFrom") or params.get("baselineTo"):
            base_from, base_to = params.window(city, "baselineFrom", "baselineTo")
            body["deltas"] = gvw_bin_deltas(
                self.store, key, (from_ts, to_ts), (base_from, base_to), edges=edges
            )
            body["baselineFrom"] = base_from.isoformat()
            body["baselineTo"] = base_to.isoformat()
        return body

    def _analyzed_frames(self, city: str, camera: str, from_ts, to_ts):
        frames = self.store.query_frames(city, camera, from_ts, to_ts)
        p = self.config.sociability
        return [analyze_frame(f, p) for f in frames]

    def sociability_summary(self, params: _Params) -> dict:
        city = params.require("city")
        camera = params.require("camera")
        from_ts, to_ts = params.window(city)
        results = self._analyzed_frames(city, camera, from_ts, to_ts)
        base = {
            "city": city,
            "camera": camera,
            "from": from_ts.isoformat(),
            "to": to_ts.isoformat(),
        }
        if not results:
            return base | {
                "frames": 0,
                "avgPedsDensity": None,
                "maxPedsDensity": None,
                "complianceRate": None,
                "totalViolatedPairs": 0,
            }
        summary = summarize(results, from_ts, to_ts).to_json()
        summary.pop("from"), summary.pop("to")
        return base | summary

    def sociability_frames(self, params: _Params) -> dict:
        city = params.require("city")
        camera = params.require("camera")
        from_ts, to_ts = params.window(city)
        limit = params.integer("limit", 100, lo=1, hi=1000)
        cursor = params.integer("cursor", 0, lo=0)
        results = self._analyzed_frames(city, camera, from_ts, to_ts)
        page = results[cursor : cursor + limit]
        next_cursor = cursor + limit if cursor + limit < len(results) else None
        return {
            "city": city,
            "camera": camera,
            "from": from_ts.isoformat(),
            "to": to_ts.isoformat(),
            "total": len(results),
            "frames": [r.to_json() for r in page],
            "nextCursor": str(next_cursor) if next_cursor is not None else None,
        }

    def compare(self, params: _Params) -> dict:
        city = params.require("city")
        metric = params.metric()
        location = params.require("location")
        left = params.window(city, "leftFrom", "leftTo")
        right = params.window(city, "rightFrom", "rightTo")
        agg = params.get("agg")
        if agg not in (None, "sum", "mean"):
            raise ApiBadRequest("agg must be sum or mean")
        key = SeriesKey(city, metric, location)
        result = compare_windows(self.store, key, left, right, agg)
        return {"city": city, "metric": metric.value, "location": location, **result}


def make_server(api: DashboardApi, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    cors = api.config.cors_origin

    class Handler(BaseHTTPRequestHandler):
        server_version = f"citypulse/{__version__}"

        def do_GET(self):  # noqa: N802 - BaseHTTPRequestHandler API
            parsed = urlparse(self.path)
            status, payload = api.respond(parsed.path, parsed.query)
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            if cors:
                self.send_header("Access-Control-Allow-Origin", cors)
            self.end_headers()
            self.wfile.write(payload)

        def log_message(self, fmt, *args):  # quiet by default; stderr is for the CLI
            pass

    return ThreadingHTTPServer((host, port), Handler)


def serve(store: Warehouse, config: PlatformConfig, listen: str) -> None:
    """Run the API server until interrupted. listen is "host:port"."""
    host, _, port_text = listen.rpartition(":")
    server = make_server(DashboardApi(store, config), host or "127.0.0.1", int(port_text))
    try:
        server.serve_forever()
    finally:
        server.server_close()
