"""Walk a feed batch through the quality gate.

Generates the bundled demo dataset, ingests one clean file, then shows
what happens to a corrupted and a stale batch: scores drop, the verdict
flips to quarantine, and nothing quarantined is ever queryable.
"""

import json
import tempfile
from datetime import datetime, timedelta, timezone
from pathlib import Path

from citypulse.config import load_config
from citypulse.fixtures import build_fixture_dataset
from citypulse.ingestion import dispatch, evaluate_batch, parse_batch
from citypulse.warehouse import Warehouse

workdir = Path(tempfile.mkdtemp(prefix="citypulse_demo_"))
dataset = build_fixture_dataset(workdir / "feeds")
config = load_config(dataset.config_path)
print(f"demo dataset with {len(dataset.files)} feed files under {workdir}/feeds\n")

volume_file = next(f for f in dataset.files if f.feed_id == "sea_volume")
descriptor = config.feed("sea_volume")

print(f"== clean batch: {volume_file.path.name}")
parsed = parse_batch(descriptor, volume_file.path.read_bytes())
report = evaluate_batch(descriptor, parsed, "demo-clean", volume_file.as_of, config.thresholds)
print(json.dumps(report.to_json()["dimensionScores"], indent=2))
print("verdict:", report.verdict)

with Warehouse(workdir / "warehouse", writer=True) as store:
    dispatch(report, parsed, store)
    print("stored batches:", store.high_water())

    print("\n== corrupted batch (every fourth row mangled)")
    lines = volume_file.path.read_text().splitlines()
    for i in range(1, len(lines), 4):
        lines[i] = lines[i].rsplit(",", 1)[0] + ",NaN"
    parsed = parse_batch(descriptor, "\n".join(lines))
    report = evaluate_batch(descriptor, parsed, "demo-corrupt", volume_file.as_of, config.thresholds)
    print("accuracy:", round(report.accuracy, 3), "-> verdict:", report.verdict)
    print("sample reject:", report.rejects[0])
    dispatch(report, parsed, store)

    print("\n== stale batch (evaluated a year late)")
    parsed = parse_batch(descriptor, volume_file.path.read_bytes())
    late = volume_file.as_of + timedelta(days=365)
    report = evaluate_batch(descriptor, parsed, "demo-stale", late, config.thresholds)
    print("timeliness:", report.timeliness, "-> verdict:", report.verdict)
    dispatch(report, parsed, store)

    print("\nquarantine directory now holds:",
          [p.name for p in (workdir / "warehouse" / "quarantine").rglob("*.json")])
    print("warehouse still holds only the clean batch:", store.high_water(), "applied")
