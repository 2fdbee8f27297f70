import os
import random
import signal
import subprocess
import sys
import time
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from citypulse.core import BoundingBox, MetricKind, ObjectClass, SeriesKey, TimeSeriesRecord
from citypulse.ingestion import Detection, DetectionFrame, WarehouseUnavailable
from citypulse.warehouse import CorruptSegment, Warehouse

UTC = timezone.utc
T0 = datetime(2020, 3, 2, 0, 0, tzinfo=UTC)
KEY = SeriesKey("nyc", MetricKind.TRAFFIC_VOLUME, "loc1")


def rec(minutes, value, location="loc1", meta=None):
    return TimeSeriesRecord(
        "nyc", MetricKind.TRAFFIC_VOLUME, location, T0 + timedelta(minutes=minutes), value,
        meta or {},
    )


def frame(seconds, seq, camera="cam1"):
    det = Detection(ObjectClass.PERSON, 0.9, BoundingBox(10, 10, 40, 170))
    return DetectionFrame(camera, "nyc", T0 + timedelta(seconds=seconds), seq, (det,))


@pytest.fixture
def store(tmp_path):
    with Warehouse(tmp_path / "wh", writer=True) as wh:
        yield wh


def test_query_half_open_range(store):
    t1, t2, t3 = 0, 10, 20
    store.append("b1", records=[rec(t1, 1.0), rec(t2, 2.0), rec(t3, 3.0)])
    got = store.query(KEY, T0, T0 + timedelta(minutes=20))
    assert [r.value for r in got] == [1.0, 2.0]


def test_query_unknown_series_is_empty(store):
    assert store.query(SeriesKey("nyc", MetricKind.SPEED, "nowhere"), T0, T0 + timedelta(1)) == []


def test_query_rejects_empty_range(store):
    with pytest.raises(ValueError):
        store.query(KEY, T0, T0)


def test_duplicate_batch_is_noop(store):
    batch = [rec(0, 1.0), rec(5, 2.0)]
    assert store.append("b1", records=batch) == "applied"
    assert store.append("b1", records=batch) == "duplicate"
    got = store.query(KEY, T0, T0 + timedelta(hours=1))
    assert len(got) == 2


def test_round_trip_sorted(store):
    records = [rec(m, float(m)) for m in (30, 0, 20, 10)]
    store.append("b1", records=records)
    got = store.query(KEY, T0, T0 + timedelta(hours=1))
    assert [r.value for r in got] == [0.0, 10.0, 20.0, 30.0]
    assert got == sorted(records, key=lambda r: r.ts)


def test_insertion_order_tie_break(store):
    store.append("b1", records=[rec(0, 1.0)])
    store.append("b2", records=[rec(0, 2.0)])
    got = store.query(KEY, T0, T0 + timedelta(minutes=1))
    assert [r.value for r in got] == [1.0, 2.0]


def test_revision_supersedes_original(store):
    store.append("b1", records=[rec(0, 100.0), rec(5, 200.0)])
    store.append("b2", records=[rec(0, 110.0, meta={"revision": "1"})])
    got = store.query(KEY, T0, T0 + timedelta(hours=1))
    assert [r.value for r in got] == [110.0, 200.0]
    # later revision wins
    store.append("b3", records=[rec(0, 120.0, meta={"revision": "2"})])
    got = store.query(KEY, T0, T0 + timedelta(hours=1))
    assert [r.value for r in got] == [120.0, 200.0]


def test_query_results_independent_of_append_interleaving(tmp_path):
    a = [rec(0, 1.0), rec(10, 2.0)]
    b = [rec(5, 3.0), rec(15, 4.0)]
    with Warehouse(tmp_path / "w1", writer=True) as w1:
        w1.append("A", records=a)
        w1.append("B", records=b)
        r1 = w1.query(KEY, T0, T0 + timedelta(hours=1))
    with Warehouse(tmp_path / "w2", writer=True) as w2:
        w2.append("B", records=b)
        w2.append("A", records=a)
        r2 = w2.query(KEY, T0, T0 + timedelta(hours=1))
    assert r1 == r2


def test_frames_ordered_by_time_then_seq(store):
    store.append("f1", frames=[frame(0, 1), frame(30, 2)])
    store.append("f2", frames=[frame(30, 3), frame(60, 4)])
    got = store.query_frames("nyc", "cam1", T0, T0 + timedelta(minutes=5))
    assert [f.seq for f in got] == [1, 2, 3, 4]


def test_list_series_counts_and_extents(store):
    store.append("b1", records=[rec(0, 1.0), rec(10, 2.0), rec(0, 5.0, location="loc2")])
    infos = store.list_series("nyc")
    assert [(i.key.location, i.count) for i in infos] == [("loc1", 2), ("loc2", 1)]
    assert infos[0].tmin == T0
    assert infos[0].tmax == T0 + timedelta(minutes=10)
    assert store.list_series("seattle") == []


def test_list_cameras(store):
    store.append("f1", frames=[frame(0, 1), frame(30, 2, camera="cam2")])
    cams = store.list_cameras("nyc")
    assert [(c.camera, c.frames) for c in cams] == [("cam1", 1), ("cam2", 1)]


def test_reopen_reads_everything(tmp_path):
    root = tmp_path / "wh"
    with Warehouse(root, writer=True) as wh:
        wh.append("b1", records=[rec(0, 1.0)])
        wh.append("f1", frames=[frame(0, 1)])
    reader = Warehouse(root)
    assert len(reader.query(KEY, T0, T0 + timedelta(1))) == 1
    assert len(reader.query_frames("nyc", "cam1", T0, T0 + timedelta(1))) == 1
    assert reader.has_batch("b1") and reader.has_batch("f1")


def test_read_only_store_cannot_append(tmp_path):
    root = tmp_path / "wh"
    Warehouse(root, writer=True).close()
    reader = Warehouse(root)
    with pytest.raises(WarehouseUnavailable):
        reader.append("b1", records=[rec(0, 1.0)])


def test_single_writer_lock(tmp_path):
    root = tmp_path / "wh"
    with Warehouse(root, writer=True):
        with pytest.raises(WarehouseUnavailable):
            Warehouse(root, writer=True)


def test_torn_ledger_tail_recovered(tmp_path):
    root = tmp_path / "wh"
    with Warehouse(root, writer=True) as wh:
        wh.append("b1", records=[rec(0, 1.0)])
        wh.append("b2", records=[rec(10, 2.0)])
    ledger = root / "ledger.ndjson"
    with open(ledger, "ab") as fh:
        fh.write(b'{"seq": 3, "batch": "torn')  # simulated partial write
    with Warehouse(root, writer=True) as wh:
        assert wh.has_batch("b1") and wh.has_batch("b2")
        assert len(wh.query(KEY, T0, T0 + timedelta(1))) == 2
        # the torn tail was truncated; appends work again
        wh.append("b3", records=[rec(20, 3.0)])
    with Warehouse(root) as wh:
        assert wh.has_batch("b3")


def test_orphan_segment_cleanup_and_verify_warning(tmp_path):
    root = tmp_path / "wh"
    with Warehouse(root, writer=True) as wh:
        wh.append("b1", records=[rec(0, 1.0)])
    stray = root / "series" / "nyc" / "traffic_volume" / "loc1" / "99999999-00.seg"
    stray.write_bytes(b"garbage segment without ledger entry\n")
    reader = Warehouse(root)
    result = reader.verify()
    assert result.ok  # orphans are warnings, not errors
    assert any("orphan" in w for w in result.warnings)
    with Warehouse(root, writer=True) as wh:
        assert not stray.exists()
        assert wh.verify().warnings == []


def test_verify_detects_corrupted_segment(tmp_path):
    root = tmp_path / "wh"
    with Warehouse(root, writer=True) as wh:
        wh.append("b1", records=[rec(0, 1.0)])
        seg = next((root / "series").rglob("*.seg"))
    data = bytearray(seg.read_bytes())
    data[len(data) // 2] ^= 0xFF
    seg.write_bytes(bytes(data))
    reader = Warehouse(root)
    result = reader.verify()
    assert not result.ok
    assert any("checksum" in e for e in result.errors)
    with pytest.raises(CorruptSegment):
        reader.query(KEY, T0, T0 + timedelta(1))


def test_crash_recovery_under_sigkill(tmp_path):
    """Kill the appender at random points; every ACKed batch must survive."""
    rng = random.Random(2024)
    child = Path(__file__).parent / "crash_child.py"
    for round_no in range(5):
        root = tmp_path / f"wh{round_no}"
        ack_file = tmp_path / f"ack{round_no}.log"
        ack_file.touch()
        proc = subprocess.Popen(
            [sys.executable, str(child), str(root), str(ack_file), str(round_no)],
            stdout=subprocess.DEVNULL,
            stderr=subprocess.DEVNULL,
        )
        time.sleep(rng.uniform(0.05, 0.4))
        proc.send_signal(signal.SIGKILL)
        proc.wait()

        acked = [line.strip() for line in ack_file.read_text().splitlines() if line.strip()]
        with Warehouse(root, writer=True) as wh:  # recovery happens here
            assert wh.verify().ok
            for batch_id in acked:
                assert wh.has_batch(batch_id), f"acked batch {batch_id} lost"
            # all acked records are fully queryable
            total = sum(
                i.count for i in wh.list_series("nyc")
            )
            assert total >= 5 * len(acked)
            # re-appending an acked batch stays a no-op
            if acked:
                assert (
                    wh.append("%s" % acked[0], records=[rec(0, 1.0)]) == "duplicate"
                )
