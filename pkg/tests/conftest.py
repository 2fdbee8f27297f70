import hashlib
import threading

import pytest

from citypulse.api import DashboardApi, make_server
from citypulse.config import load_config
from citypulse.fixtures import build_fixture_dataset
from citypulse.ingestion import dispatch, evaluate_batch, parse_batch
from citypulse.warehouse import Warehouse


@pytest.fixture(scope="session")
def fixture_dataset(tmp_path_factory):
    return build_fixture_dataset(tmp_path_factory.mktemp("feeds"))


@pytest.fixture(scope="session")
def fixture_config(fixture_dataset):
    return load_config(fixture_dataset.config_path)


@pytest.fixture(scope="session")
def fixture_warehouse_path(fixture_dataset, fixture_config, tmp_path_factory):
    """Warehouse populated from every fixture feed file (library path; the
    CLI path is exercised separately)."""
    root = tmp_path_factory.mktemp("wh") / "warehouse"
    with Warehouse(root, writer=True) as store:
        for f in fixture_dataset.files:
            descriptor = fixture_config.feed(f.feed_id)
            parsed = parse_batch(descriptor, f.path.read_bytes())
            batch_id = hashlib.sha256(f.path.read_bytes()).hexdigest()
            report = evaluate_batch(
                descriptor, parsed, batch_id, f.as_of, fixture_config.thresholds
            )
            assert report.verdict == "accept", (f.path, report.to_json())
            assert report.rejected == 0
            dispatch(report, parsed, store)
    return root


@pytest.fixture(scope="session")
def fixture_store(fixture_warehouse_path):
    store = Warehouse(fixture_warehouse_path)
    yield store
    store.close()


@pytest.fixture(scope="session")
def api(fixture_store, fixture_config):
    return DashboardApi(fixture_store, fixture_config)


@pytest.fixture(scope="session")
def api_base_url(api):
    server = make_server(api)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address
    yield f"http://{host}:{port}"
    server.shutdown()
    server.server_close()
