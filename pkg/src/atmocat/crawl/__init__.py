"""Focused crawler for OGC web services."""

from atmocat.crawl.classify import DocKind, classify_response
from atmocat.crawl.engine import CrawlManager, CrawlReport, Crawler, CrawlSettings, run_crawl
from atmocat.crawl.frontier import CrawlTask, Frontier, FrontierEntry, TaskState
from atmocat.crawl.seeds import SeedFileProvider, StubSeedProvider, read_seed_file
from atmocat.crawl.transport import (
    HttpTransport, ManualClock, Response, SimulatedWeb, SystemClock,
)
from atmocat.crawl.urls import ProbePatterns, derive_ows_probes, extract_links, normalize_url

__all__ = [
    "CrawlManager", "CrawlReport", "CrawlSettings", "CrawlTask", "Crawler", "DocKind", "Frontier",
    "FrontierEntry", "HttpTransport", "ManualClock", "ProbePatterns", "Response",
    "SeedFileProvider", "SimulatedWeb", "StubSeedProvider", "SystemClock", "TaskState",
    "classify_response", "derive_ows_probes", "extract_links", "normalize_url", "read_seed_file",
    "run_crawl",
]
