"""Plain-text (INI) platform configuration.

One file describes the deployment: city timezones, global quality-gate
thresholds, sociability defaults, API settings, and one section per feed:

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

    [feed:wsdot_i5_volume]
    city = seattle
    metric = traffic_volume        ; or detection_frames for camera feeds
    format = csv
    cadence = 1d
    valid_min = 0
    valid_max = 1000000
    unit = count
    staleness = 30d                ; optional, default 3 x cadence
    threshold_timeliness = 0.5     ; optional per-feed gate overrides
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path

from .core import MetricKind, register_city_zone
from .ingestion import FRAME_FEED_TOKEN, FeedDescriptor, QualityThresholds
from .sociability import ProjectionParams

_DURATION_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(s|sec|m|min|h|d)\s*$")
_DURATION_UNITS = {"s": 1, "sec": 1, "m": 60, "min": 60, "h": 3600, "d": 86400}


class ConfigError(Exception):
    pass


def parse_duration(text: str) -> timedelta:
    """Parse durations like "30s", "5m", "1h", "1d"."""
    m = _DURATION_RE.match(text)
    if not m:
        raise ConfigError(f"bad duration {text!r} (use e.g. 30s, 5m, 1h, 1d)")
    return timedelta(seconds=float(m.group(1)) * _DURATION_UNITS[m.group(2)])


@dataclass
class PlatformConfig:
    cities: dict[str, str] = field(default_factory=dict)  # city -> IANA zone
    feeds: dict[str, FeedDescriptor] = field(default_factory=dict)
    thresholds: QualityThresholds = field(default_factory=QualityThresholds)
    sociability: ProjectionParams = field(default_factory=ProjectionParams)
    cors_origin: str | None = None

    def feed(self, feed_id: str) -> FeedDescriptor:
        try:
            return self.feeds[feed_id]
        except KeyError:
            raise ConfigError(f"feed {feed_id!r} not in config") from None

    def cadence_for(self, city: str, metric: MetricKind) -> timedelta | None:
        """Cadence of the feed serving (city, metric), if exactly one exists."""
        matches = [
            f.cadence for f in self.feeds.values() if f.city == city and f.metric is metric
        ]
        return matches[0] if len(matches) == 1 else None


def _feed_from_section(feed_id: str, section: configparser.SectionProxy) -> FeedDescriptor:
    metric_tok = section.get("metric", "").strip()
    if not metric_tok:
        raise ConfigError(f"feed {feed_id}: metric is required")
    if metric_tok == FRAME_FEED_TOKEN:
        metric = None
        fmt = section.get("format", "ndjson").strip()
    else:
        try:
            metric = MetricKind(metric_tok)
        except ValueError:
            raise ConfigError(f"feed {feed_id}: unknown metric {metric_tok!r}") from None
        fmt = section.get("format", "csv").strip()

    valid_range = None
    if "valid_min" in section or "valid_max" in section:
        try:
            valid_range = (section.getfloat("valid_min"), section.getfloat("valid_max"))
        except (TypeError, ValueError):
            raise ConfigError(f"feed {feed_id}: valid_min and valid_max must both be numbers") from None

    overrides = {}
    for dim in ("accuracy", "validity", "timeliness", "granularity"):
        key = f"threshold_{dim}"
        if key in section:
            overrides[dim] = section.getfloat(key)

    return FeedDescriptor(
        feed_id=feed_id,
        city=section.get("city", "").strip(),
        metric=metric,
        format=fmt,
        cadence=parse_duration(section.get("cadence", "1h")),
        valid_range=valid_range,
        unit_label=section.get("unit", "").strip(),
        schema_version=section.getint("schema_version", 1),
        confidence_cutoff=section.getfloat("confidence_cutoff", 0.5),
        staleness=parse_duration(section["staleness"]) if "staleness" in section else None,
        thresholds=overrides,
    )


def load_config(path: str | Path) -> PlatformConfig:
    """Read the config file and register every city's timezone."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")

    config = PlatformConfig()
    for name in parser.sections():
        section = parser[name]
        if name.startswith("city:"):
            city = name.split(":", 1)[1]
            zone = section.get("timezone", "UTC").strip()
            config.cities[city] = zone
            register_city_zone(city, zone)
        elif name.startswith("feed:"):
            feed_id = name.split(":", 1)[1]
            config.feeds[feed_id] = _feed_from_section(feed_id, section)
        elif name == "thresholds":
            config.thresholds = QualityThresholds(
                accuracy=section.getfloat("accuracy", 0.9),
                validity=section.getfloat("validity", 0.9),
                timeliness=section.getfloat("timeliness", 0.5),
                granularity=section.getfloat("granularity", 0.5),
            )
        elif name == "sociability":
            config.sociability = ProjectionParams(
                assumed_height_m=section.getfloat("assumed_height_m", 1.70),
                distance_threshold_m=section.getfloat("distance_threshold_m", 1.8288),
                confidence_cutoff=section.getfloat("confidence_cutoff", 0.5),
                min_box_height_px=section.getfloat("min_box_height_px", 8.0),
            )
        elif name == "api":
            config.cors_origin = section.get("cors_origin", "").strip() or None
        else:
            raise ConfigError(f"unknown config section [{name}]")
    return config
