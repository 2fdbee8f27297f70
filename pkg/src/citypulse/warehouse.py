"""Append-oriented on-disk time-series store.

Layout under the warehouse root:

    ledger.ndjson                          append-only batch ledger, one
                                           CRC-protected JSON entry per line
    series/<city>/<metric>/<location>/     immutable segment files, one per
        <seq>-<k>.seg                      (batch, series) pair
    frames/<city>/<camera>/<seq>-<k>.seg   detection-frame segments
    quarantine/<feed>/<batch>.json         rejected batches and reject rows,
        <batch>.rejects.ndjson             never reachable from queries

Write protocol per append: segment files are written to a temp name,
fsynced, renamed into place, and the directory fsynced; only then is the
ledger line appended and fsynced. A batch is acknowledged only after its
ledger line is durable, so a crash at any point leaves either a fully
queryable batch or an unacknowledged orphan that writer-mode open cleans
up. Queries read nothing that the ledger does not reference.

Records are immutable; corrections arrive as new batches carrying a
``revision`` meta tag, and queries return the latest revision per
(series, timestamp).
"""

from __future__ import annotations

import errno
import hashlib
import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from urllib.parse import quote

from .core import MetricKind, SeriesKey, TimeSeriesRecord, parse_rfc3339
from .ingestion import DetectionFrame, ParsedBatch, QualityReport, WarehouseUnavailable

LEDGER_NAME = "ledger.ndjson"
SEGMENT_SCHEMA = 1


class WarehouseError(Exception):
    """Base class for storage failures."""


class StorageFull(WarehouseError):
    """The filesystem ran out of space mid-append."""


class CorruptSegment(WarehouseError):
    """A ledger-referenced segment failed its checksum or shape check."""


class CorruptLedger(WarehouseError):
    """The ledger is damaged beyond a torn tail; refusing to guess."""


def _fsync_dir(path: Path) -> None:
    fd = os.open(path, os.O_RDONLY)
    try:
        os.fsync(fd)
    finally:
        os.close(fd)


def _safe(component: str) -> str:
    return quote(component, safe="")


def _entry_crc(entry: dict) -> str:
    payload = json.dumps(entry, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class SegmentMeta:
    """Ledger-side description of one immutable segment file."""

    path: str  # relative to root
    kind: str  # "series" | "frames"
    city: str
    metric: str  # metric token, or camera id for frame segments
    location: str
    count: int
    tmin: datetime
    tmax: datetime
    seq: int

    def to_json(self) -> dict:
        return {
            "path": self.path,
            "kind": self.kind,
            "city": self.city,
            "metric": self.metric,
            "location": self.location,
            "count": self.count,
            "tmin": self.tmin.isoformat(),
            "tmax": self.tmax.isoformat(),
        }


@dataclass
class SeriesInfo:
    """Listing entry: one series with its record count and time extent."""

    key: SeriesKey
    count: int
    tmin: datetime
    tmax: datetime

    def to_json(self) -> dict:
        return {
            "city": self.key.city,
            "metric": self.key.metric.value,
            "location": self.key.location,
            "count": self.count,
            "tmin": self.tmin.isoformat(),
            "tmax": self.tmax.isoformat(),
        }


@dataclass
class CameraInfo:
    city: str
    camera: str
    frames: int
    tmin: datetime
    tmax: datetime

    def to_json(self) -> dict:
        return {
            "city": self.city,
            "camera": self.camera,
            "frames": self.frames,
            "tmin": self.tmin.isoformat(),
            "tmax": self.tmax.isoformat(),
        }


@dataclass
class VerifyResult:
    ok: bool
    segments_checked: int
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "segmentsChecked": self.segments_checked,
            "errors": self.errors,
            "warnings": self.warnings,
        }


class Warehouse:
    """One warehouse directory; open read-only by default, writer for ingest.

    Writer mode takes an exclusive advisory lock (single writer per root),
    truncates a torn ledger tail, and removes unacknowledged orphan
    segments left by a crash. Readers touch nothing.
    """

    def __init__(self, root: str | Path, *, writer: bool = False, create: bool = True):
        self.root = Path(root)
        self.writer = writer
        self._lock = threading.RLock()
        self._lock_fd: int | None = None
        self._batches: set[str] = set()
        self._series: dict[SeriesKey, list[SegmentMeta]] = {}
        self._frames: dict[tuple[str, str], list[SegmentMeta]] = {}
        self._seq = 0
        self._segment_cache: dict[str, list] = {}

        if create:
            self.root.mkdir(parents=True, exist_ok=True)
        elif not self.root.is_dir():
            raise WarehouseUnavailable(f"no warehouse at {self.root}")

        if writer:
            self._acquire_writer_lock()
        self._load_ledger()
        if writer:
            self._clean_orphans()

    # -- lifecycle -----------------------------------------------------

    def _acquire_writer_lock(self) -> None:
        import fcntl

        fd = os.open(self.root / ".lock", os.O_RDWR | os.O_CREAT, 0o644)
        try:
            fcntl.flock(fd, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError:
            os.close(fd)
            raise WarehouseUnavailable(f"another writer holds {self.root}")
        self._lock_fd = fd

    def close(self) -> None:
        if self._lock_fd is not None:
            os.close(self._lock_fd)
            self._lock_fd = None

    def __enter__(self) -> "Warehouse":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- ledger --------------------------------------------------------

    @property
    def _ledger_path(self) -> Path:
        return self.root / LEDGER_NAME

    def _load_ledger(self) -> None:
        path = self._ledger_path
        if not path.exists():
            return
        raw = path.read_bytes()
        offset = 0
        valid_end = 0
        entries: list[dict] = []
        bad_at: int | None = None
        for line in raw.split(b"\n"):
            line_end = offset + len(line) + 1
            if line.strip():
                entry = self._parse_ledger_line(line)
                if entry is None:
                    bad_at = offset
                    break
                entries.append(entry)
                valid_end = min(line_end, len(raw))
            offset = line_end

        if bad_at is not None:
            tail = raw[bad_at:]
            if self._has_valid_line(tail.split(b"\n")[1:]):
                raise CorruptLedger(
                    f"ledger damaged mid-file at byte {bad_at}; manual repair required"
                )
            if self.writer:
                with open(path, "r+b") as fh:
                    fh.truncate(valid_end)
                    fh.flush()
                    os.fsync(fh.fileno())

        for entry in entries:
            self._index_entry(entry)

    def _has_valid_line(self, lines: list[bytes]) -> bool:
        return any(self._parse_ledger_line(line) is not None for line in lines if line.strip())

    @staticmethod
    def _parse_ledger_line(line: bytes) -> dict | None:
        try:
            entry = json.loads(line)
        except (json.JSONDecodeError, UnicodeDecodeError):
            return None
        if not isinstance(entry, dict) or "crc" not in entry:
            return None
        crc = entry.pop("crc")
        if _entry_crc(entry) != crc:
            return None
        return entry

    def _index_entry(self, entry: dict) -> None:
        seq = int(entry["seq"])
        self._seq = max(self._seq, seq)
        self._batches.add(entry["batch"])
        for seg_doc in entry["segments"]:
            meta = SegmentMeta(
                path=seg_doc["path"],
                kind=seg_doc["kind"],
                city=seg_doc["city"],
                metric=seg_doc["metric"],
                location=seg_doc["location"],
                count=int(seg_doc["count"]),
                tmin=parse_rfc3339(seg_doc["tmin"]),
                tmax=parse_rfc3339(seg_doc["tmax"]),
                seq=seq,
            )
            if meta.kind == "frames":
                self._frames.setdefault((meta.city, meta.location), []).append(meta)
            else:
                key = SeriesKey(meta.city, MetricKind(meta.metric), meta.location)
                self._series.setdefault(key, []).append(meta)

    def _referenced_paths(self) -> set[str]:
        refs: set[str] = set()
        for metas in self._series.values():
            refs.update(m.path for m in metas)
        for metas in self._frames.values():
            refs.update(m.path for m in metas)
        return refs

    def _clean_orphans(self) -> list[str]:
        refs = self._referenced_paths()
        removed = []
        for base in ("series", "frames"):
            basedir = self.root / base
            if not basedir.is_dir():
                continue
            for seg in basedir.rglob("*.seg"):
                rel = seg.relative_to(self.root).as_posix()
                if rel not in refs:
                    seg.unlink()
                    removed.append(rel)
        return removed

    # -- append --------------------------------------------------------

    def append(
        self,
        batch_id: str,
        records: list[TimeSeriesRecord] | None = None,
        frames: list[DetectionFrame] | None = None,
        feed_id: str = "",
    ) -> str:
        """Durably append one batch; returns "applied" or "duplicate".

        The whole batch becomes visible atomically: segments first, then a
        single fsynced ledger line that acknowledges everything.
        """
        records = records or []
        frames = frames or []
        with self._lock:
            if self._lock_fd is None:
                raise WarehouseUnavailable("warehouse opened read-only")
            if batch_id in self._batches:
                return "duplicate"
            seq = self._seq + 1
            try:
                metas = self._write_segments(seq, batch_id, records, frames)
                entry = {
                    "seq": seq,
                    "batch": batch_id,
                    "feed": feed_id,
                    "appended_at": datetime.now(timezone.utc).isoformat(),
                    "count": len(records) + len(frames),
                    "segments": [m.to_json() for m in metas],
                }
                entry["crc"] = _entry_crc({k: v for k, v in entry.items()})
                line = json.dumps(entry, sort_keys=True, separators=(",", ":")) + "\n"
                with open(self._ledger_path, "ab") as fh:
                    fh.write(line.encode())
                    fh.flush()
                    os.fsync(fh.fileno())
            except OSError as exc:
                if exc.errno == errno.ENOSPC:
                    raise StorageFull(str(exc)) from exc
                raise
            self._seq = seq
            self._batches.add(batch_id)
            for meta in metas:
                if meta.kind == "frames":
                    self._frames.setdefault((meta.city, meta.location), []).append(meta)
                else:
                    key = SeriesKey(meta.city, MetricKind(meta.metric), meta.location)
                    self._series.setdefault(key, []).append(meta)
            return "applied"

    def _write_segments(
        self,
        seq: int,
        batch_id: str,
        records: list[TimeSeriesRecord],
        frames: list[DetectionFrame],
    ) -> list[SegmentMeta]:
        groups: list[tuple[str, tuple, list]] = []
        by_series: dict[SeriesKey, list[TimeSeriesRecord]] = {}
        for rec in records:
            by_series.setdefault(rec.key, []).append(rec)
        for key, recs in by_series.items():
            groups.append(("series", (key.city, key.metric.value, key.location), recs))
        by_camera: dict[tuple[str, str], list[DetectionFrame]] = {}
        for frame in frames:
            by_camera.setdefault((frame.city, frame.camera), []).append(frame)
        for (city, camera), frs in by_camera.items():
            groups.append(("frames", (city, camera, camera), frs))

        metas: list[SegmentMeta] = []
        for k, (kind, ident, items) in enumerate(groups):
            city = ident[0]
            if kind == "series":
                metric, location = ident[1], ident[2]
                reldir = Path("series") / _safe(city) / _safe(metric) / _safe(location)
                timestamps = [it.ts for it in items]
                payload = [it.to_json() for it in items]
            else:
                camera = ident[1]
                metric, location = camera, camera
                reldir = Path("frames") / _safe(city) / _safe(camera)
                timestamps = [it.captured_at for it in items]
                payload = [it.to_json() for it in items]

            absdir = self.root / reldir
            absdir.mkdir(parents=True, exist_ok=True)
            name = f"{seq:08d}-{k:02d}.seg"
            header = {
                "kind": kind,
                "city": city,
                "metric": metric,
                "location": location,
                "batch": batch_id,
                "count": len(items),
                "schema": SEGMENT_SCHEMA,
            }
            lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
            lines.extend(json.dumps(doc, sort_keys=True, separators=(",", ":")) for doc in payload)
            body = ("\n".join(lines) + "\n").encode()
            digest = hashlib.sha256(body).hexdigest()
            content = body + f"sha256:{digest}\n".encode()

            tmp = absdir / (name + ".tmp")
            with open(tmp, "wb") as fh:
                fh.write(content)
                fh.flush()
                os.fsync(fh.fileno())
            os.rename(tmp, absdir / name)
            _fsync_dir(absdir)

            metas.append(
                SegmentMeta(
                    path=(reldir / name).as_posix(),
                    kind=kind,
                    city=city,
                    metric=metric,
                    location=location,
                    count=len(items),
                    tmin=min(timestamps),
                    tmax=max(timestamps),
                    seq=seq,
                )
            )
        return metas

    # -- reading -------------------------------------------------------

    def _read_segment(self, meta: SegmentMeta) -> list:
        cached = self._segment_cache.get(meta.path)
        if cached is not None:
            return cached
        path = self.root / meta.path
        try:
            raw = path.read_bytes()
        except OSError as exc:
            raise CorruptSegment(f"{meta.path}: unreadable ({exc})") from exc
        head, _, last = raw.rpartition(b"sha256:")
        if not head and not raw.startswith(b"sha256:"):
            raise CorruptSegment(f"{meta.path}: missing checksum footer")
        digest = last.strip().decode(errors="replace")
        if hashlib.sha256(head).hexdigest() != digest:
            raise CorruptSegment(f"{meta.path}: checksum mismatch")
        lines = head.decode().splitlines()
        header = json.loads(lines[0])
        if header["count"] != len(lines) - 1:
            raise CorruptSegment(f"{meta.path}: count mismatch")
        if header["kind"] == "frames":
            items = [DetectionFrame.from_json(json.loads(line)) for line in lines[1:]]
        else:
            items = [TimeSeriesRecord.from_json(json.loads(line)) for line in lines[1:]]
        if len(self._segment_cache) > 256:
            self._segment_cache.clear()
        self._segment_cache[meta.path] = items
        return items

    def query(
        self, key: SeriesKey, from_ts: datetime, to_ts: datetime
    ) -> list[TimeSeriesRecord]:
        """All records of a series in [from_ts, to_ts), ascending by
        timestamp with insertion-order tie-break; unknown series yield [].

        When several records share a timestamp and any of them carries a
        ``revision`` meta tag, only the latest revision survives.
        """
        if not from_ts < to_ts:
            raise ValueError("query range must satisfy from < to")
        metas = self._series.get(key, [])
        picked: list[tuple[datetime, int, TimeSeriesRecord]] = []
        pos = 0
        for meta in metas:
            if meta.tmax < from_ts or meta.tmin >= to_ts:
                pos += meta.count
                continue
            for rec in self._read_segment(meta):
                if from_ts <= rec.ts < to_ts:
                    picked.append((rec.ts, pos, rec))
                pos += 1
        picked.sort(key=lambda t: (t[0], t[1]))
        return _collapse_revisions(picked)

    def query_frames(
        self, city: str, camera: str, from_ts: datetime, to_ts: datetime
    ) -> list[DetectionFrame]:
        """Frames for one camera in [from_ts, to_ts), by (captured_at, seq)."""
        if not from_ts < to_ts:
            raise ValueError("query range must satisfy from < to")
        out: list[DetectionFrame] = []
        for meta in self._frames.get((city, camera), []):
            if meta.tmax < from_ts or meta.tmin >= to_ts:
                continue
            out.extend(
                f for f in self._read_segment(meta) if from_ts <= f.captured_at < to_ts
            )
        out.sort(key=lambda f: (f.captured_at, f.seq))
        return out

    def list_series(self, city: str | None = None) -> list[SeriesInfo]:
        infos = []
        for key in sorted(self._series):
            if city is not None and key.city != city:
                continue
            metas = self._series[key]
            infos.append(
                SeriesInfo(
                    key=key,
                    count=sum(m.count for m in metas),
                    tmin=min(m.tmin for m in metas),
                    tmax=max(m.tmax for m in metas),
                )
            )
        return infos

    def list_cameras(self, city: str | None = None) -> list[CameraInfo]:
        infos = []
        for (cam_city, camera) in sorted(self._frames):
            if city is not None and cam_city != city:
                continue
            metas = self._frames[(cam_city, camera)]
            infos.append(
                CameraInfo(
                    city=cam_city,
                    camera=camera,
                    frames=sum(m.count for m in metas),
                    tmin=min(m.tmin for m in metas),
                    tmax=max(m.tmax for m in metas),
                )
            )
        return infos

    def high_water(self) -> str:
        """Monotone token that changes on every applied batch."""
        return str(self._seq)

    def has_batch(self, batch_id: str) -> bool:
        return batch_id in self._batches

    # -- quarantine ----------------------------------------------------

    def _quarantine_dir(self, feed_id: str) -> Path:
        d = self.root / "quarantine" / _safe(feed_id or "unknown")
        d.mkdir(parents=True, exist_ok=True)
        return d

    def quarantine_batch(
        self, feed_id: str, batch_id: str, report: QualityReport, parsed: ParsedBatch
    ) -> Path:
        doc = {
            "report": report.to_json(),
            "accepted": [r.to_json() for r in parsed.records]
            + [f.to_json() for f in parsed.frames],
            "rejects": [{"raw": raw, "reason": reason} for raw, reason in parsed.rejects],
        }
        path = self._quarantine_dir(feed_id) / f"{_safe(batch_id)}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, indent=2))
        os.rename(tmp, path)
        return path

    def quarantine_rejects(
        self, feed_id: str, batch_id: str, rejects: list[tuple[str, str]]
    ) -> Path:
        path = self._quarantine_dir(feed_id) / f"{_safe(batch_id)}.rejects.ndjson"
        tmp = path.with_suffix(".tmp")
        with open(tmp, "w") as fh:
            for raw, reason in rejects:
                fh.write(json.dumps({"raw": raw, "reason": reason}) + "\n")
        os.rename(tmp, path)
        return path

    # -- integrity -----------------------------------------------------

    def verify(self) -> VerifyResult:
        """Re-check every ledger-referenced segment checksum and count.

        Unreferenced (orphan) segments are warnings: they are invisible to
        queries and removed at the next writer open.
        """
        errors: list[str] = []
        checked = 0
        all_metas = [m for metas in self._series.values() for m in metas]
        all_metas += [m for metas in self._frames.values() for m in metas]
        for meta in all_metas:
            checked += 1
            try:
                items = self._read_segment(meta)
            except CorruptSegment as exc:
                errors.append(str(exc))
                continue
            if len(items) != meta.count:
                errors.append(f"{meta.path}: ledger count {meta.count} != {len(items)}")
        warnings = []
        refs = self._referenced_paths()
        for base in ("series", "frames"):
            basedir = self.root / base
            if not basedir.is_dir():
                continue
            for seg in basedir.rglob("*.seg"):
                rel = seg.relative_to(self.root).as_posix()
                if rel not in refs:
                    warnings.append(f"orphan segment (unacknowledged batch): {rel}")
        return VerifyResult(
            ok=not errors, segments_checked=checked, errors=errors, warnings=warnings
        )


def _collapse_revisions(
    picked: list[tuple[datetime, int, TimeSeriesRecord]]
) -> list[TimeSeriesRecord]:
    out: list[TimeSeriesRecord] = []
    i = 0
    while i < len(picked):
        j = i
        while j < len(picked) and picked[j][0] == picked[i][0]:
            j += 1
        group = picked[i:j]
        if any("revision" in rec.meta for _, _, rec in group):
            def rev_key(item):
                _, pos, rec = item
                try:
                    rev = int(rec.meta.get("revision", -1))
                except ValueError:
                    rev = -1
                return (rev, pos)

            out.append(max(group, key=rev_key)[2])
        else:
            out.extend(rec for _, _, rec in group)
        i = j
    return out
