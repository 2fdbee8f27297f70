"""Feed parsing, batch quality gating, and dispatch into the warehouse.

A batch moves through three stages:

1. ``parse_batch`` turns raw CSV/NDJSON bytes into typed records or
   detection frames. Malformed rows are never dropped silently; each one
   lands in the reject list with a reason code.
2. ``evaluate_batch`` scores the batch on accuracy, timeliness, validity
   and granularity and decides accept vs quarantine.
3. ``dispatch`` appends accepted payloads to the warehouse (idempotent,
   at-least-once with bounded backoff) and preserves everything else in
   the quarantine area for audit.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from math import isfinite
from typing import Iterable

from .core import (
    CANONICAL_UNITS,
    BoundingBox,
    MetricKind,
    ObjectClass,
    TimeSeriesRecord,
    parse_rfc3339,
)

CSV_HEADER = ["city", "metric", "location", "timestamp", "value"]

# Reject reason codes (stable, machine-parseable).
R_BAD_FIELD_COUNT = "bad_field_count"
R_CITY_MISMATCH = "city_mismatch"
R_UNKNOWN_METRIC = "unknown_metric"
R_METRIC_MISMATCH = "metric_mismatch"
R_BAD_TIMESTAMP = "bad_timestamp"
R_BAD_VALUE = "bad_value"
R_NON_FINITE = "non_finite_value"
R_NEGATIVE_COUNT = "negative_count"
R_NONPOSITIVE_TRAVEL_TIME = "nonpositive_travel_time"
R_NEGATIVE_SPEED = "negative_speed"
R_NEGATIVE_VALUE = "negative_value"
R_BAD_META = "bad_meta"
R_BAD_JSON = "bad_json"
R_BAD_FRAME_SHAPE = "bad_frame_shape"
R_BAD_BBOX = "bad_bbox"
R_BAD_CONFIDENCE = "bad_confidence"
R_NONMONOTONIC_SEQ = "nonmonotonic_seq"


class IngestError(Exception):
    """Base class for ingest-stage failures."""


class UnreadableStream(IngestError):
    """The input could not be read or decoded at all."""


class SchemaMismatch(IngestError):
    """Stream shape does not match the feed descriptor (header, format, unit)."""


class WarehouseUnavailable(IngestError):
    """Transient storage failure; dispatch retries with bounded backoff."""


# Unit converters into the canonical unit per metric. Identity entries are
# implied by CANONICAL_UNITS; only aliases/conversions are listed.
_UNIT_CONVERTERS: dict[MetricKind, dict[str, float]] = {
    MetricKind.TRAVEL_TIME: {"min": 1.0, "minutes": 1.0, "s": 1 / 60, "sec": 1 / 60, "seconds": 1 / 60, "h": 60.0, "hours": 60.0},
    MetricKind.SPEED: {"mph": 1.0, "km/h": 0.6213711922, "kph": 0.6213711922, "m/s": 2.2369362921},
    MetricKind.TRUCK_GVW: {"kips": 1.0, "lbs": 0.001, "tons": 2.0},
}


def unit_factor(metric: MetricKind, unit_label: str) -> float:
    """Multiplier from a feed's unit into the metric's canonical unit."""
    label = unit_label.strip().lower()
    table = _UNIT_CONVERTERS.get(metric)
    if table is not None:
        if label in table:
            return table[label]
        raise SchemaMismatch(f"unsupported unit {unit_label!r} for {metric}")
    if label in ("", "count", CANONICAL_UNITS[metric]):
        return 1.0
    raise SchemaMismatch(f"unsupported unit {unit_label!r} for {metric}")


@dataclass(frozen=True)
class Detection:
    """One detected object in a camera frame."""

    object_class: ObjectClass
    confidence: float
    bbox: BoundingBox

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must be in [0, 1]")

    def to_json(self) -> dict:
        return {
            "class": self.object_class.value,
            "conf": self.confidence,
            "bbox": self.bbox.as_list(),
        }


@dataclass(frozen=True)
class DetectionFrame:
    """One camera frame's surviving detections."""

    camera: str
    city: str
    captured_at: datetime
    seq: int
    detections: tuple[Detection, ...] = ()

    def to_json(self) -> dict:
        return {
            "camera": self.camera,
            "city": self.city,
            "ts": self.captured_at.isoformat(),
            "seq": self.seq,
            "detections": [d.to_json() for d in self.detections],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DetectionFrame":
        return cls(
            camera=doc["camera"],
            city=doc["city"],
            captured_at=parse_rfc3339(doc["ts"]),
            seq=int(doc["seq"]),
            detections=tuple(
                Detection(
                    ObjectClass(d["class"]),
                    float(d["conf"]),
                    BoundingBox(*[float(v) for v in d["bbox"]]),
                )
                for d in doc["detections"]
            ),
        )


FRAME_FEED_TOKEN = "detection_frames"


@dataclass(frozen=True)
class FeedDescriptor:
    """Per-source ingest configuration.

    ``metric`` is None for camera feeds (format must then be ndjson); the
    descriptor then describes a stream of detection frames instead of a
    scalar time series. A city of "*" disables the per-row city check
    (used by ad-hoc, configless parsing).
    """

    feed_id: str
    city: str
    metric: MetricKind | None
    format: str  # "csv" | "ndjson"
    cadence: timedelta
    valid_range: tuple[float, float] | None = None
    unit_label: str = ""
    schema_version: int = 1
    confidence_cutoff: float = 0.5
    staleness: timedelta | None = None  # default 3 x cadence
    thresholds: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.cadence <= timedelta(0):
            raise ValueError("cadence must be positive")
        if self.valid_range is not None and not self.valid_range[0] < self.valid_range[1]:
            raise ValueError("valid_range min must be < max")
        if self.format not in ("csv", "ndjson"):
            raise ValueError(f"unknown format {self.format!r}")

    @property
    def is_frame_feed(self) -> bool:
        return self.metric is None

    @property
    def staleness_horizon(self) -> timedelta:
        return self.staleness if self.staleness is not None else 3 * self.cadence


@dataclass(frozen=True)
class QualityThresholds:
    """Minimum per-dimension scores for a batch to be accepted."""

    accuracy: float = 0.9
    validity: float = 0.9
    timeliness: float = 0.5
    granularity: float = 0.5

    def merged(self, overrides: dict[str, float]) -> "QualityThresholds":
        if not overrides:
            return self
        vals = {k: getattr(self, k) for k in ("accuracy", "validity", "timeliness", "granularity")}
        vals.update({k: v for k, v in overrides.items() if k in vals})
        return QualityThresholds(**vals)


@dataclass
class ParsedBatch:
    """Output of parse_batch: typed payload plus audited rejects."""

    records: list[TimeSeriesRecord] = field(default_factory=list)
    frames: list[DetectionFrame] = field(default_factory=list)
    rejects: list[tuple[str, str]] = field(default_factory=list)  # (raw line, reason)
    dropped_unknown_class: int = 0
    dropped_low_confidence: int = 0

    @property
    def accepted(self) -> int:
        return len(self.records) + len(self.frames)

    @property
    def total(self) -> int:
        return self.accepted + len(self.rejects)


@dataclass
class QualityReport:
    """Four-dimension verdict for one parsed batch."""

    feed_id: str
    batch_id: str
    total: int
    accepted: int
    rejected: int
    accuracy: float
    timeliness: float
    validity: float
    granularity: float
    verdict: str  # "accept" | "quarantine"
    rejects: list[tuple[str, str]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "feedId": self.feed_id,
            "batchId": self.batch_id,
            "counts": {"total": self.total, "accepted": self.accepted, "rejected": self.rejected},
            "dimensionScores": {
                "accuracy": self.accuracy,
                "timeliness": self.timeliness,
                "validity": self.validity,
                "granularity": self.granularity,
            },
            "rejects": [{"raw": raw, "reason": reason} for raw, reason in self.rejects],
            "verdict": self.verdict,
            "notes": self.notes,
        }


def _decode(raw: bytes | str | io.IOBase) -> str:
    if isinstance(raw, str):
        return raw
    try:
        if isinstance(raw, bytes):
            return raw.decode("utf-8")
        data = raw.read()
        if isinstance(data, bytes):
            return data.decode("utf-8")
        return data
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableStream(str(exc)) from exc


def _parse_meta(text: str) -> dict[str, str]:
    meta: dict[str, str] = {}
    for pair in text.split(";"):
        pair = pair.strip()
        if not pair:
            continue
        if "=" not in pair:
            raise ValueError(f"bad meta pair {pair!r}")
        k, v = pair.split("=", 1)
        if not k:
            raise ValueError("empty meta key")
        meta[k] = v
    return meta


def _parse_csv(descriptor: FeedDescriptor, text: str) -> ParsedBatch:
    lines = text.splitlines()
    if not lines:
        return ParsedBatch()
    header = next(csv.reader([lines[0]]))
    header = [h.strip().lower() for h in header]
    if header[:5] != CSV_HEADER or len(header) > 6 or (len(header) == 6 and header[5] != "meta"):
        raise SchemaMismatch(f"unexpected CSV header: {lines[0]!r}")
    factor = unit_factor(descriptor.metric, descriptor.unit_label) if descriptor.metric else 1.0

    out = ParsedBatch()
    for raw in lines[1:]:
        if not raw.strip():
            continue
        fields = next(csv.reader([raw]))
        if len(fields) not in (5, 6):
            out.rejects.append((raw, R_BAD_FIELD_COUNT))
            continue
        city, metric_tok, location, ts_text, value_text = (f.strip() for f in fields[:5])
        if descriptor.city != "*" and city != descriptor.city:
            out.rejects.append((raw, R_CITY_MISMATCH))
            continue
        try:
            metric = MetricKind(metric_tok)
        except ValueError:
            out.rejects.append((raw, R_UNKNOWN_METRIC))
            continue
        if metric != descriptor.metric:
            out.rejects.append((raw, R_METRIC_MISMATCH))
            continue
        try:
            ts = parse_rfc3339(ts_text)
        except ValueError:
            out.rejects.append((raw, R_BAD_TIMESTAMP))
            continue
        try:
            value = float(value_text)
        except ValueError:
            out.rejects.append((raw, R_BAD_VALUE))
            continue
        if not isfinite(value):
            out.rejects.append((raw, R_NON_FINITE))
            continue
        value *= factor
        meta: dict[str, str] = {}
        if len(fields) == 6 and fields[5].strip():
            try:
                meta = _parse_meta(fields[5])
            except ValueError:
                out.rejects.append((raw, R_BAD_META))
                continue
        try:
            record = TimeSeriesRecord(city, metric, location, ts, value, meta)
        except ValueError as exc:
            msg = str(exc)
            if "travel_time" in msg:
                out.rejects.append((raw, R_NONPOSITIVE_TRAVEL_TIME))
            elif "speed" in msg:
                out.rejects.append((raw, R_NEGATIVE_SPEED))
            elif "truck_gvw" in msg:
                out.rejects.append((raw, R_NEGATIVE_VALUE))
            else:
                out.rejects.append((raw, R_NEGATIVE_COUNT))
            continue
        out.records.append(record)
    return out


def _parse_ndjson_frames(descriptor: FeedDescriptor, text: str) -> ParsedBatch:
    out = ParsedBatch()
    last_seq: dict[str, int] = {}
    for raw in text.splitlines():
        if not raw.strip():
            continue
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError:
            out.rejects.append((raw, R_BAD_JSON))
            continue
        if not isinstance(doc, dict) or not {"camera", "city", "ts", "seq", "detections"} <= doc.keys():
            out.rejects.append((raw, R_BAD_FRAME_SHAPE))
            continue
        if descriptor.city != "*" and doc["city"] != descriptor.city:
            out.rejects.append((raw, R_CITY_MISMATCH))
            continue
        try:
            ts = parse_rfc3339(str(doc["ts"]))
        except ValueError:
            out.rejects.append((raw, R_BAD_TIMESTAMP))
            continue
        try:
            seq = int(doc["seq"])
        except (TypeError, ValueError):
            out.rejects.append((raw, R_BAD_FRAME_SHAPE))
            continue
        camera = str(doc["camera"])
        if camera in last_seq and seq <= last_seq[camera]:
            out.rejects.append((raw, R_NONMONOTONIC_SEQ))
            continue

        detections: list[Detection] = []
        bad_reason = None
        for det in doc["detections"] if isinstance(doc["detections"], list) else [None]:
            if not isinstance(det, dict) or not {"class", "conf", "bbox"} <= det.keys():
                bad_reason = R_BAD_FRAME_SHAPE
                break
            try:
                conf = float(det["conf"])
            except (TypeError, ValueError):
                bad_reason = R_BAD_CONFIDENCE
                break
            if not 0.0 <= conf <= 1.0:
                bad_reason = R_BAD_CONFIDENCE
                break
            try:
                cls = ObjectClass(det["class"])
            except ValueError:
                out.dropped_unknown_class += 1
                continue
            if conf < descriptor.confidence_cutoff:
                out.dropped_low_confidence += 1
                continue
            try:
                bbox = BoundingBox(*[float(v) for v in det["bbox"]])
            except (TypeError, ValueError):
                bad_reason = R_BAD_BBOX
                break
            detections.append(Detection(cls, conf, bbox))
        if bad_reason:
            out.rejects.append((raw, bad_reason))
            continue

        last_seq[camera] = seq
        out.frames.append(DetectionFrame(camera, doc["city"], ts, seq, tuple(detections)))
    return out


def parse_batch(descriptor: FeedDescriptor, raw: bytes | str | io.IOBase) -> ParsedBatch:
    """Parse one raw batch; every input row becomes a record, frame, or reject.

    Blank lines are not rows and are skipped. Raises UnreadableStream on I/O
    or decode failure and SchemaMismatch when the stream shape contradicts
    the descriptor (wrong header, unknown unit, frame feed declared as csv).
    """
    text = _decode(raw)
    if descriptor.is_frame_feed:
        if descriptor.format != "ndjson":
            raise SchemaMismatch("detection frame feeds must be ndjson")
        return _parse_ndjson_frames(descriptor, text)
    if descriptor.format == "csv":
        return _parse_csv(descriptor, text)
    raise SchemaMismatch(f"unsupported format {descriptor.format!r} for series feed")


def _granularity(timestamps: list[datetime], cadence: timedelta) -> float:
    if not timestamps:
        return 0.0
    lo, hi = min(timestamps), max(timestamps)
    expected = round((hi - lo) / cadence) + 1
    if expected <= 0:
        return 1.0
    return min(1.0, len(timestamps) / expected)


def evaluate_batch(
    descriptor: FeedDescriptor,
    parsed: ParsedBatch,
    batch_id: str,
    now: datetime,
    thresholds: QualityThresholds | None = None,
) -> QualityReport:
    """Score a parsed batch on the four quality dimensions and set the verdict.

    An empty batch (total 0) signals an upstream feed outage; it is reported
    as a quarantine verdict with a note rather than raised.
    """
    gates = (thresholds or QualityThresholds()).merged(descriptor.thresholds)
    accepted = parsed.accepted
    total = parsed.total
    notes: list[str] = []
    if parsed.dropped_unknown_class:
        notes.append(f"dropped_unknown_class={parsed.dropped_unknown_class}")
    if parsed.dropped_low_confidence:
        notes.append(f"dropped_low_confidence={parsed.dropped_low_confidence}")

    if total == 0:
        notes.append("empty_batch")
        return QualityReport(
            descriptor.feed_id, batch_id, 0, 0, 0, 0.0, 0.0, 0.0, 0.0, "quarantine", [], notes
        )

    accuracy = accepted / total

    if descriptor.is_frame_feed:
        timestamps = [f.captured_at for f in parsed.frames]
        validity = 1.0 if accepted else 0.0
    else:
        timestamps = [r.ts for r in parsed.records]
        if descriptor.valid_range is None or not accepted:
            validity = 1.0 if accepted else 0.0
        else:
            lo, hi = descriptor.valid_range
            in_range = sum(1 for r in parsed.records if lo <= r.value <= hi)
            validity = in_range / accepted

    horizon = descriptor.staleness_horizon
    if accepted:
        fresh = sum(1 for ts in timestamps if (now - ts) <= horizon)
        timeliness = fresh / accepted
    else:
        timeliness = 0.0

    granularity = _granularity(timestamps, descriptor.cadence)

    ok = (
        accuracy >= gates.accuracy
        and validity >= gates.validity
        and timeliness >= gates.timeliness
        and granularity >= gates.granularity
    )
    return QualityReport(
        feed_id=descriptor.feed_id,
        batch_id=batch_id,
        total=total,
        accepted=accepted,
        rejected=len(parsed.rejects),
        accuracy=accuracy,
        timeliness=timeliness,
        validity=validity,
        granularity=granularity,
        verdict="accept" if ok else "quarantine",
        rejects=list(parsed.rejects),
        notes=notes,
    )


@dataclass
class DispatchResult:
    appended: bool
    append_result: str | None  # "applied" | "duplicate" | None
    quarantined: bool


def dispatch(
    report: QualityReport,
    parsed: ParsedBatch,
    store,
    *,
    max_retries: int = 3,
    backoff_s: float = 0.05,
) -> DispatchResult:
    """Route an evaluated batch: accepted payloads into the warehouse
    (all-or-nothing, idempotent on batch id), everything else into quarantine.

    Rejected rows of accepted batches are preserved verbatim in quarantine
    for audit. Retries WarehouseUnavailable with bounded backoff; the append
    itself is idempotent so at-least-once delivery is safe.
    """
    if report.verdict != "accept":
        store.quarantine_batch(report.feed_id, report.batch_id, report, parsed)
        return DispatchResult(appended=False, append_result=None, quarantined=True)

    attempt = 0
    while True:
        try:
            result = store.append(
                report.batch_id,
                records=parsed.records,
                frames=parsed.frames,
                feed_id=report.feed_id,
            )
            break
        except WarehouseUnavailable:
            attempt += 1
            if attempt > max_retries:
                raise
            time.sleep(backoff_s * (2 ** (attempt - 1)))

    if parsed.rejects:
        store.quarantine_rejects(report.feed_id, report.batch_id, parsed.rejects)
    return DispatchResult(appended=True, append_result=result, quarantined=bool(parsed.rejects))
