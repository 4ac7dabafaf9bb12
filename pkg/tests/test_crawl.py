from collections import defaultdict

import pytest

from atmocat.crawl import CrawlSettings, CrawlTask, ManualClock, SimulatedWeb, run_crawl
from atmocat.crawl.engine import CrawlManager, Crawler
from atmocat.crawl.frontier import TaskState
from atmocat.crawl.urls import normalize_url
from atmocat.harvest import Harvester
from atmocat.semantic import default_vocabulary, load_vocabulary
from atmocat.store import Catalogue
from conftest import WEB, caps_bytes, crawl_site

WMS_URL = "http://maps.example.org/wms?service=WMS&request=GetCapabilities"


def ten_page_site(clock):
    """Ten HTML pages on one host; page 7 links the WMS endpoint."""
    web = SimulatedWeb(clock=clock)
    for i in range(10):
        links = [f'<a href="/p{j}.html">p{j}</a>' for j in (2 * i + 1, 2 * i + 2) if j < 10]
        if i == 7:
            links.append(f'<a href="{WMS_URL}">map</a>')
        web.add(f"http://site.example.org/p{i}.html", "<html><body>" + "".join(links) + "</body></html>")
    web.add(WMS_URL, caps_bytes("wms-minimal-1.3.0.xml"), content_type="text/xml")
    return web


def crawl(web, clock, vocab_terms, **task_kw):
    task_kw.setdefault("max_depth", 5)
    task_kw.setdefault("max_pages", 50)
    task_kw.setdefault("per_host_delay_ms", 0)
    task = CrawlTask(seed_urls=["http://site.example.org/p0.html"], **task_kw)
    with Catalogue() as store:
        report = run_crawl(task, web, Harvester(store, load_vocabulary(vocab_terms)), clock,
                           CrawlSettings(respect_robots=False))
        return task, report, store.service_count()


def test_ten_page_site_ingests_its_wms():
    clock = ManualClock(0)
    task, report, services = crawl(ten_page_site(clock), clock, ["sea surface temperature"])
    assert task.state is TaskState.DONE
    assert report.pages_visited == 11
    assert report.capabilities_found == 1
    assert report.services_ingested == 1
    assert report.services_rejected_by_semantics == 0
    assert services == 1


def test_ten_page_site_with_off_topic_vocabulary():
    clock = ManualClock(0)
    _, report, services = crawl(ten_page_site(clock), clock, ["volcanic ash"])
    assert report.capabilities_found == 1
    assert report.services_ingested == 0
    assert report.services_rejected_by_semantics == 1
    assert services == 0


def test_page_budget_of_one():
    clock = ManualClock(0)
    _, report, _ = crawl(ten_page_site(clock), clock, ["albedo"], max_pages=1)
    assert report.pages_visited == 1


def test_depth_bound_limits_reach():
    clock = ManualClock(0)
    web = ten_page_site(clock)
    _, report, _ = crawl(web, clock, ["albedo"], max_depth=1)
    assert set(web.fetched_urls()) == {f"http://site.example.org/p{i}.html" for i in range(3)}
    assert report.capabilities_found == 0


def test_fetch_errors_are_recorded_not_fatal():
    clock = ManualClock(0)
    web = SimulatedWeb(clock=clock)
    web.add("http://a.example/", '<a href="/gone">x</a><a href="/slow">y</a><a href="/reset">z</a>'
            '<a href="/bad.xml">w</a>')
    web.add("http://a.example/slow", "x", timeout=True)
    web.add("http://a.example/reset", "x", network_error=True)
    web.add("http://a.example/bad.xml", b"<WMS_Capabilities version='1.3.0'><Service>",
            content_type="text/xml")
    task = CrawlTask(seed_urls=["http://a.example/"], per_host_delay_ms=0)
    with Catalogue() as store:
        report = run_crawl(task, web, Harvester(store, load_vocabulary(["x"])), clock,
                           CrawlSettings(respect_robots=False))
    assert task.state is TaskState.DONE
    assert sorted(report.errors) == sorted([
        ("http://a.example/gone", "http-404"),
        ("http://a.example/slow", "timeout"),
        ("http://a.example/reset", "network"),
        ("http://a.example/bad.xml", "malformed-xml"),
    ])
    # one retry on a transient network error, none on timeout or 4xx
    assert web.fetched_urls().count("http://a.example/reset") == 2
    assert web.fetched_urls().count("http://a.example/gone") == 1


def test_robots_txt_is_honoured():
    clock = ManualClock(0)
    web = SimulatedWeb(clock=clock)
    web.add("http://r.example/robots.txt", "User-agent: *\nDisallow: /private\n", content_type="text/plain")
    web.add("http://r.example/", '<a href="/private/x.html">p</a><a href="/open.html">o</a>')
    web.add("http://r.example/open.html", "<html></html>")
    web.add("http://r.example/private/x.html", "<html></html>")
    task = CrawlTask(seed_urls=["http://r.example/"], per_host_delay_ms=0)
    with Catalogue() as store:
        run_crawl(task, web, Harvester(store, load_vocabulary(["x"])), clock, CrawlSettings())
    assert "http://r.example/private/x.html" not in web.fetched_urls()
    assert "http://r.example/open.html" in web.fetched_urls()


def test_probe_urls_replace_endpoint_links():
    clock = ManualClock(0)
    web = SimulatedWeb(clock=clock)
    web.add("http://p.example/", '<a href="http://svc.example/geoserver/wms">wms</a>')
    web.add("http://svc.example/geoserver/wms?service=WMS&request=GetCapabilities",
            caps_bytes("wms-minimal-1.3.0.xml"), content_type="text/xml")
    task = CrawlTask(seed_urls=["http://p.example/"], per_host_delay_ms=0)
    with Catalogue() as store:
        report = run_crawl(task, web, Harvester(store, load_vocabulary(["sea surface temperature"])),
                           clock, CrawlSettings(respect_robots=False))
    assert report.services_ingested == 1


# --- the bundled simulated site --------------------------------------------

def test_fixture_site_report(store):
    task, web, report = crawl_site(store)
    assert task.state is TaskState.DONE
    assert report.capabilities_found == 3
    assert report.services_ingested == 2
    assert report.services_rejected_by_semantics == 1
    assert [kind for _, kind in report.errors] == ["ows-exception"]
    assert report.pages_visited <= 50


def test_fixture_site_no_url_fetched_twice(store):
    _, web, _ = crawl_site(store)
    urls = web.fetched_urls()
    assert len(urls) == len(set(urls))


@pytest.mark.parametrize("delay", [100, 1000])
def test_fixture_site_politeness(store, delay):
    _, web, _ = crawl_site(store, delay_ms=delay)
    last = {}
    for t, url in web.log:
        host = url.split("/")[2]
        if host in last:
            assert t - last[host] >= delay
        last[host] = t


def test_fixture_site_is_deterministic():
    runs = []
    for _ in range(2):
        with Catalogue() as store:
            _, web, report = crawl_site(store)
            runs.append((web.log, report.to_dict(), store.state_dump()))
    assert runs[0] == runs[1]


def test_multi_worker_keeps_invariants(store):
    clock = ManualClock(0)
    _, web, report = crawl_site(store, clock=clock, workers=4)
    urls = web.fetched_urls()
    assert len(urls) == len(set(urls))
    assert report.services_ingested == 2
    by_host = defaultdict(list)
    for t, url in web.log:
        by_host[url.split("/")[2]].append(t)
    for times in by_host.values():
        times.sort()
        assert all(b - a >= 100 for a, b in zip(times, times[1:]))


def test_cancel_aborts_with_partial_report(store):
    clock = ManualClock(0)
    web = SimulatedWeb.from_manifest(WEB / "site.yaml", clock)
    task = CrawlTask(seed_urls=["http://portal.atmos-data.example.gov/"], per_host_delay_ms=100)
    crawler = Crawler(task, web, Harvester(store, load_vocabulary(["x"])), clock,
                      CrawlSettings(respect_robots=False))
    original = web.request

    def cancelling(url, timeout=10):
        if len(web.log) == 3:
            task.cancel()
        return original(url, timeout)

    web.request = cancelling
    report = crawler.run()
    assert task.state is TaskState.ABORTED
    assert 1 <= report.pages_visited < 10


def test_manager_runs_in_background(store):
    clock = ManualClock(0)
    web = SimulatedWeb.from_manifest(WEB / "site.yaml", clock)
    manager = CrawlManager(web, Harvester(store, default_vocabulary()), clock,
                           CrawlSettings(respect_robots=False))
    task = CrawlTask(seed_urls=[normalize_url("http://portal.atmos-data.example.gov/")],
                     max_depth=3, max_pages=50, per_host_delay_ms=100)
    task_id = manager.start(task)
    manager.wait(task_id, timeout=30)
    status = manager.status(task_id)
    assert status["state"] == "Done"
    assert status["report"]["pagesVisited"] >= 1
