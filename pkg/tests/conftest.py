from __future__ import annotations

import sys
from pathlib import Path

import pytest

from atmocat.crawl import CrawlSettings, CrawlTask, ManualClock, SimulatedWeb, read_seed_file, run_crawl
from atmocat.harvest import Harvester
from atmocat.semantic import default_vocabulary
from atmocat.store import Catalogue

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
CAPS = FIXTURES / "capabilities"
WEB = FIXTURES / "web"

sys.path.insert(0, str(Path(__file__).resolve().parent))


def caps_bytes(name: str) -> bytes:
    return (CAPS / name).read_bytes()


@pytest.fixture
def store():
    with Catalogue() as cat:
        yield cat


@pytest.fixture
def clock():
    return ManualClock(0)


def crawl_site(store, clock=None, max_pages=50, delay_ms=100, workers=1):
    clock = clock or ManualClock(0)
    web = SimulatedWeb.from_manifest(WEB / "site.yaml", clock)
    task = CrawlTask(seed_urls=read_seed_file(WEB / "seeds.txt"), max_depth=3,
                     max_pages=max_pages, per_host_delay_ms=delay_ms)
    report = run_crawl(task, web, Harvester(store, default_vocabulary()), clock,
                       CrawlSettings(respect_robots=False, workers=workers))
    return task, web, report


@pytest.fixture
def crawled(store):
    crawl_site(store)
    return store


# --- acceptance reporting ----------------------------------------------------

ACCEPTANCE_LINES: dict[int, str] = {}


class Criterion:
    """Context manager that records one PASS/FAIL line for an acceptance criterion."""

    def __init__(self, number: int, title: str):
        self.number, self.title = number, title

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        detail = "" if exc is None else f" ({type(exc).__name__}: {str(exc).splitlines()[0][:120] if str(exc) else ''})"
        line = f"criterion {self.number} {status}: {self.title}{detail}"
        ACCEPTANCE_LINES[self.number] = line
        print(line)
        return False


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
