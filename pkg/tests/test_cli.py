import csv
import io
import json
import signal
import socket
import subprocess
import sys
import time

import httpx
import pytest
from click.testing import CliRunner

from atmocat.cli import main
from atmocat.stats import classify_countries, countries_csv, country_counts
from atmocat.store import Catalogue
from conftest import WEB

SITE = str(WEB / "site.yaml")
SEEDS = str(WEB / "seeds.txt")


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def db(tmp_path):
    return str(tmp_path / "cat.db")


def invoke(runner, *args):
    return runner.invoke(main, list(args), catch_exceptions=False)


def crawl_into(runner, db, *extra):
    return invoke(runner, "--web", SITE, "crawl", "--seeds", SEEDS, "--store", db,
                  "--delay-ms", "100", "--json", *extra)


def test_crawl_simulated_web(runner, db):
    result = crawl_into(runner, db)
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert report["servicesIngested"] >= 1
    assert report["capabilitiesFound"] == 3


def test_crawl_budget_and_usage(runner, db):
    report = json.loads(crawl_into(runner, db, "--max-pages", "1").output)
    assert report["pagesVisited"] == 1
    assert invoke(runner, "crawl", "--store", db).exit_code == 2
    assert invoke(runner, "crawl", "--seeds", SEEDS, "--bogus").exit_code == 2


def test_crawl_missing_store_directory(runner, tmp_path):
    result = invoke(runner, "--web", SITE, "crawl", "--seeds", SEEDS,
                    "--store", str(tmp_path / "no" / "such" / "dir.db"))
    assert result.exit_code == 1


def test_crawl_with_keywords(runner, db, tmp_path):
    cfg = tmp_path / "atmocat.yaml"
    cfg.write_text(f"seeds: {WEB / 'search-results.yaml'}\nper_host_delay_ms: 100\n")
    result = invoke(runner, "--config", str(cfg), "--web", SITE, "crawl", "--keywords", "World SST",
                    "--store", db, "--json")
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["servicesIngested"] >= 1


def test_harvest(runner, db):
    url = "http://ocean.example.gov/wms?service=WMS&request=GetCapabilities"
    summary = json.loads(invoke(runner, "--web", SITE, "harvest", url, "--store", db).output)
    assert summary["accepted"] == 1 and summary["layerCount"] == 1
    bad = invoke(runner, "--web", SITE, "harvest", "http://portal.atmos-data.example.gov/", "--store", db)
    assert bad.exit_code == 1 and "NotCapabilities" in bad.output


def test_search(runner, db):
    crawl_into(runner, db)
    table = invoke(runner, "search", "--q", "SST", "--store", db)
    assert table.exit_code == 0 and "Sea Surface Temperature" in table.output
    page = json.loads(invoke(runner, "search", "--q", "SST", "--format", "json", "--store", db).output)
    assert set(page) == {"total", "offset", "results"} and page["total"] >= 1
    empty = invoke(runner, "search", "--q", "zzzzzz", "--store", db)
    assert empty.exit_code == 0 and empty.output == ""


def test_search_usage_errors(runner, db):
    bad = invoke(runner, "search", "--cql", "title LIKE", "--store", db)
    assert bad.exit_code == 2 and "position 10" in bad.output
    assert invoke(runner, "search", "--limit", "0", "--store", db).exit_code == 2
    assert invoke(runner, "search", "--bbox", "1,2,3", "--store", db).exit_code == 2


def test_stats_exports(runner, db):
    empty = invoke(runner, "stats", "--countries", "--store", db)
    assert empty.exit_code == 0 and empty.output == "country,count,classIndex,labeled\n"
    crawl_into(runner, db)
    out = invoke(runner, "stats", "--countries", "--store", db).output
    with Catalogue(db) as store:
        assert out == countries_csv(classify_countries(country_counts(store), 6))
    rows = list(csv.DictReader(io.StringIO(invoke(runner, "stats", "--providers", "10", "--country",
                                                  "us", "--store", db).output)))
    assert 1 <= len(rows) <= 10
    doc = json.loads(invoke(runner, "stats", "--providers", "1", "--format", "json", "--store", db).output)
    assert len(doc["providers"]) == 1
    assert invoke(runner, "stats", "--store", db).exit_code == 2
    assert invoke(runner, "stats", "--countries", "--providers", "3", "--store", db).exit_code == 2


def test_workspace_commands(runner, db):
    crawl_into(runner, db)
    assert invoke(runner, "workspace", "register-user", "--email", "ada@example.org",
                  "--password", "pw", "--store", db).exit_code == 0
    ws = json.loads(invoke(runner, "workspace", "create", "--user", "ada@example.org", "--name", "sst",
                           "--store", db).output)
    assert ws["layers"] == []
    wid = str(ws["workspaceId"])
    with Catalogue(db) as store:
        layer = str(store.list_layers()[0].layer_id)
    added = json.loads(invoke(runner, "workspace", "add-layer", wid, layer, "--order", "1",
                              "--style", '{"opacity": 0.5}', "--store", db).output)
    assert added["layers"] == [{"layerId": int(layer), "displayOrder": 1,
                                "styleOverride": {"opacity": 0.5}}]
    conflict = invoke(runner, "workspace", "add-layer", wid, layer, "--order", "1", "--store", db)
    assert conflict.exit_code == 1
    shown = json.loads(invoke(runner, "workspace", "show", wid, "--store", db).output)
    assert shown == added
    removed = json.loads(invoke(runner, "workspace", "remove-layer", wid, layer, "--store", db).output)
    assert removed["layers"] == []
    assert invoke(runner, "workspace", "remove-layer", wid, layer, "--store", db).exit_code == 1
    assert invoke(runner, "workspace", "create", "--user", "ghost@example.org", "--name", "x",
                  "--store", db).exit_code == 1


def test_bad_config_path(runner):
    assert invoke(runner, "--config", "/nonexistent/atmocat.yaml", "stats", "--countries").exit_code == 1


def test_version(runner):
    assert "atmocat" in invoke(runner, "--version").output


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_serve_liveness_and_clean_shutdown(tmp_path):
    port = free_port()
    proc = subprocess.Popen(
        [sys.executable, "-m", "atmocat.cli", "serve", "--listen", f"127.0.0.1:{port}",
         "--store", str(tmp_path / "serve.db")],
        stdout=subprocess.PIPE, stderr=subprocess.STDOUT, cwd=tmp_path)
    try:
        deadline = time.time() + 20
        resp = None
        while time.time() < deadline:
            try:
                resp = httpx.get(f"http://127.0.0.1:{port}/csw",
                                 params={"request": "GetCapabilities"}, timeout=1)
                break
            except httpx.TransportError:
                time.sleep(0.1)
        assert resp is not None and resp.status_code == 200
        proc.send_signal(signal.SIGINT)
        assert proc.wait(timeout=15) == 0
    finally:
        if proc.poll() is None:
            proc.kill()
