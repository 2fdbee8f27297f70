"""Urban mobility and sociability analytics platform.

Feeds come in as CSV/NDJSON batches, pass a four-dimension quality gate,
land in an append-only warehouse, and are served back out as computed
metrics (weekly baseline deltas, hourly profiles, travel-time reliability,
speeding shares, fatality rates, GVW histograms, social-distancing
compliance) through a CLI and an HTTP API.
"""

__version__ = "0.1.0"

from .core import (
    BoundingBox,
    MetricKind,
    ObjectClass,
    SeriesKey,
    TimeSeriesRecord,
    WeekKey,
    week_key_for,
)

__all__ = [
    "BoundingBox",
    "MetricKind",
    "ObjectClass",
    "SeriesKey",
    "TimeSeriesRecord",
    "WeekKey",
    "week_key_for",
]
