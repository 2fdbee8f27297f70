"""Run the HTTP API against the demo warehouse and query every board widget.

This is the contract the dashboard frontend consumes; each request below
maps to one widget (weekly bars, profile overlay, reliability readout,
speeding gauge, GVW histogram, sociability summary, scenario compare).
"""

import json
import tempfile
import threading
import urllib.request
from pathlib import Path

from citypulse.api import DashboardApi, make_server
from citypulse.config import load_config
from citypulse.fixtures import build_fixture_dataset
from citypulse.ingestion import dispatch, evaluate_batch, parse_batch
from citypulse.warehouse import Warehouse

workdir = Path(tempfile.mkdtemp(prefix="citypulse_demo_"))
dataset = build_fixture_dataset(workdir / "feeds")
config = load_config(dataset.config_path)
with Warehouse(workdir / "warehouse", writer=True) as store:
    for f in dataset.files:
        descriptor = config.feed(f.feed_id)
        parsed = parse_batch(descriptor, f.path.read_bytes())
        report = evaluate_batch(descriptor, parsed, f.path.name, f.as_of, config.thresholds)
        dispatch(report, parsed, store)

store = Warehouse(workdir / "warehouse")
server = make_server(DashboardApi(store, config))
threading.Thread(target=server.serve_forever, daemon=True).start()
base = "http://{}:{}".format(*server.server_address)
print(f"API serving at {base}\n")

REQUESTS = [
    ("health", "/healthz"),
    ("catalog", "/v1/cities"),
    ("weekly volume", "/v1/metrics/weekly?city=seattle&metric=traffic_volume"
     "&location=i5_downtown&weeks=2020-03-30,2020-05-11&baseline=prior_year&agg=sum"),
    ("profile overlay", "/v1/metrics/profile?city=seattle&metric=travel_time"
     "&location=i5_greenlake&day=2020-02-28"),
    ("reliability", "/v1/metrics/reliability?city=seattle&location=i5_downtown"
     "&from=2020-04-27&to=2020-05-04"),
    ("speeding gauge", "/v1/metrics/speeding?city=nyc&from=2020-04-15&to=2020-04-16&limit=25"),
    ("fatality", "/v1/metrics/fatality-rate?city=nyc&from=2020-04-01&to=2020-04-23"),
    ("gvw histogram", "/v1/metrics/gvw?city=nyc&location=qb_wim"
     "&from=2020-03-13&to=2020-04-12&baselineFrom=2020-02-03&baselineTo=2020-03-13"),
    ("sociability summary", "/v1/sociability/summary?city=seattle&camera=bwy_epike"
     "&from=2020-05-18&to=2020-05-19"),
    ("scenario compare", "/v1/compare?city=seattle&metric=traffic_volume&location=i5_downtown"
     "&leftFrom=2020-03-30&leftTo=2020-04-06&rightFrom=2020-05-11&rightTo=2020-05-18&agg=sum"),
]

for label, path in REQUESTS:
    with urllib.request.urlopen(base + path) as resp:
        body = json.loads(resp.read())
    snippet = json.dumps(body)
    print(f"== {label}\n   GET {path.split('?')[0]}")
    print(f"   {snippet[:160]}{'...' if len(snippet) > 160 else ''}\n")

server.shutdown()
store.close()
