"""The crawl loop: frontier -> fetch -> classify -> follow links or ingest."""

from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from urllib.parse import urlsplit
from urllib.robotparser import RobotFileParser

from atmocat.crawl.classify import DocKind, classify_response
from atmocat.crawl.frontier import CrawlTask, Frontier, FrontierEntry, TaskState
from atmocat.crawl.transport import DEFAULT_TIMEOUT_S, Clock, Response, SystemClock, Transport
from atmocat.crawl.urls import ProbePatterns, derive_ows_probes, extract_links
from atmocat.errors import (
    CapabilitiesError, MalformedXml, NotCapabilities, TransportError, TransportTimeout,
    UnsupportedVersion,
)

log = logging.getLogger(__name__)

_ERROR_KINDS = {
    MalformedXml: "malformed-xml",
    NotCapabilities: "not-capabilities",
    UnsupportedVersion: "unsupported-version",
}


@dataclass
class CrawlReport:
    pages_visited: int = 0
    capabilities_found: int = 0
    services_ingested: int = 0
    services_rejected_by_semantics: int = 0
    errors: list[tuple[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "pagesVisited": self.pages_visited,
            "capabilitiesFound": self.capabilities_found,
            "servicesIngested": self.services_ingested,
            "servicesRejectedBySemantics": self.services_rejected_by_semantics,
            "errors": [{"url": u, "kind": k} for u, k in self.errors],
        }


@dataclass
class CrawlSettings:
    timeout_s: float = DEFAULT_TIMEOUT_S
    respect_robots: bool = True
    workers: int = 1
    user_agent: str = "atmocat"
    patterns: ProbePatterns | None = None


class Crawler:
    """Runs one crawl task against a transport, feeding capabilities to ``harvester``.

    ``harvester`` needs an ``ingest(xml, url, latency_ms, now)`` method returning
    an object with an ``accepted`` flag (see ``atmocat.harvest.Harvester``).
    """

    def __init__(self, task: CrawlTask, transport: Transport, harvester, clock: Clock | None = None,
                 settings: CrawlSettings | None = None):
        self.task = task
        self.transport = transport
        self.harvester = harvester
        self.clock = clock or SystemClock()
        self.settings = settings or CrawlSettings()
        self.report = CrawlReport()
        self.frontier = Frontier(task)
        self._lock = threading.Lock()
        self._in_flight = 0
        self._robots: dict[str, RobotFileParser | None] = {}

    # frontier helpers

    def _enqueue(self, url: str, depth: int, parent: str | None) -> None:
        probes = derive_ows_probes(url, self.settings.patterns)
        if probes:
            for probe in probes:
                self.frontier.push(FrontierEntry(probe, depth, parent, "probe"))
        else:
            self.frontier.push(FrontierEntry(url, depth, parent, "page"))

    def _claim(self):
        """Reserve the next entry and a page of budget, or say why there is none."""
        with self._lock:
            if self.task.cancel_requested:
                return "stop", None
            if self.report.pages_visited >= self.task.max_pages:
                return "stop", None
            now = self.clock.now()
            entry = self.frontier.pop(now)
            if entry is not None:
                self.report.pages_visited += 1
                self._in_flight += 1
                return "work", entry
            ready = self.frontier.next_ready_time()
            if ready is None:
                return ("stop", None) if self._in_flight == 0 else ("idle", None)
            return "wait", ready - now

    def _worker(self) -> None:
        while True:
            action, value = self._claim()
            if action == "stop":
                return
            if action == "wait":
                self.clock.sleep(value)
                continue
            if action == "idle":
                time.sleep(0.002)
                continue
            try:
                self._process(value)
            except Exception:  # a single URL must never kill the task
                log.exception("unexpected failure processing %s", value.url)
                self._error(value.url, "internal")
            finally:
                with self._lock:
                    self._in_flight -= 1

    def run(self) -> CrawlReport:
        self.task.start()
        for seed in self.task.seed_urls:
            self._enqueue(seed, 0, None)
        workers = max(1, self.settings.workers)
        if workers == 1:
            self._worker()
        else:
            with ThreadPoolExecutor(workers) as pool:
                for f in [pool.submit(self._worker) for _ in range(workers)]:
                    f.result()
        self.task.state = TaskState.ABORTED if self.task.cancel_requested else TaskState.DONE
        return self.report

    # per-URL processing

    def _error(self, url: str, kind: str) -> None:
        with self._lock:
            self.report.errors.append((url, kind))

    def _allowed(self, url: str) -> bool:
        if not self.settings.respect_robots:
            return True
        parts = urlsplit(url)
        origin = f"{parts.scheme}://{parts.netloc}"
        if origin not in self._robots:
            parser = None
            try:
                resp = self.transport.request(origin + "/robots.txt", self.settings.timeout_s)
                if resp.status < 400:
                    parser = RobotFileParser()
                    parser.parse(resp.body.decode("utf-8", errors="replace").splitlines())
            except TransportError:
                parser = None
            self._robots[origin] = parser
        parser = self._robots[origin]
        return parser is None or parser.can_fetch(self.settings.user_agent, url)

    def _fetch(self, url: str) -> Response:
        try:
            return self.transport.request(url, self.settings.timeout_s)
        except TransportError:
            # one retry for transient network failures
            return self.transport.request(url, self.settings.timeout_s)

    def _process(self, entry: FrontierEntry) -> None:
        if not self._allowed(entry.url):
            return
        started = self.clock.now()
        try:
            resp = self._fetch(entry.url)
        except TransportTimeout:
            self._error(entry.url, "timeout")
            return
        except TransportError:
            self._error(entry.url, "network")
            return
        finished = self.clock.now()
        if resp.status >= 400:
            self._error(entry.url, f"http-{resp.status}")
            return
        kind = classify_response(resp.content_type, resp.body)
        if kind is DocKind.HTML:
            for link in sorted(extract_links(resp.body, entry.url)):
                if self.task.state is TaskState.RUNNING:
                    self._enqueue(link, entry.depth + 1, entry.url)
        elif kind is DocKind.OWS_CAPABILITIES:
            with self._lock:
                self.report.capabilities_found += 1
            try:
                outcome = self.harvester.ingest(resp.body, entry.url,
                                                latency_ms=finished - started, now=finished)
            except CapabilitiesError as exc:
                self._error(entry.url, _ERROR_KINDS.get(type(exc), "parse-error"))
                return
            with self._lock:
                if outcome.accepted:
                    self.report.services_ingested += 1
                else:
                    self.report.services_rejected_by_semantics += 1
        elif kind is DocKind.OWS_EXCEPTION:
            self._error(entry.url, "ows-exception")


def run_crawl(task: CrawlTask, transport: Transport, harvester, clock: Clock | None = None,
              settings: CrawlSettings | None = None) -> CrawlReport:
    return Crawler(task, transport, harvester, clock, settings).run()


class CrawlManager:
    """Background crawl tasks with live status, used by the HTTP service."""

    def __init__(self, transport: Transport, harvester, clock: Clock | None = None,
                 settings: CrawlSettings | None = None):
        self.transport = transport
        self.harvester = harvester
        self.clock = clock
        self.settings = settings
        self._crawlers: dict[str, Crawler] = {}
        self._threads: dict[str, threading.Thread] = {}
        self._lock = threading.Lock()

    def start(self, task: CrawlTask) -> str:
        crawler = Crawler(task, self.transport, self.harvester, self.clock, self.settings)
        thread = threading.Thread(target=self._run, args=(crawler,), daemon=True,
                                  name=f"crawl-{task.task_id}")
        with self._lock:
            self._crawlers[task.task_id] = crawler
            self._threads[task.task_id] = thread
        thread.start()
        return task.task_id

    @staticmethod
    def _run(crawler: Crawler) -> None:
        try:
            crawler.run()
        except Exception:
            log.exception("crawl task %s failed", crawler.task.task_id)
            crawler.task.state = TaskState.ABORTED

    def get(self, task_id: str) -> Crawler:
        with self._lock:
            return self._crawlers[task_id]

    def status(self, task_id: str) -> dict:
        crawler = self.get(task_id)
        with crawler._lock:
            report = crawler.report.to_dict()
        return {"taskId": task_id, "state": crawler.task.state.value, "report": report}

    def cancel(self, task_id: str) -> dict:
        self.get(task_id).task.cancel()
        return self.status(task_id)

    def wait(self, task_id: str, timeout: float | None = None) -> None:
        with self._lock:
            thread = self._threads[task_id]
        thread.join(timeout)
