"""Crawl tasks and the politeness-aware URL frontier."""

from __future__ import annotations

import enum
import heapq
import itertools
import threading
import uuid
from dataclasses import dataclass, field
from urllib.parse import urlsplit

from atmocat.errors import TaskNotRunning


class TaskState(str, enum.Enum):
    PENDING = "Pending"
    RUNNING = "Running"
    DONE = "Done"
    ABORTED = "Aborted"


@dataclass
class CrawlTask:
    keywords: list[str] = field(default_factory=list)
    seed_urls: list[str] = field(default_factory=list)
    max_depth: int = 3
    max_pages: int = 100
    per_host_delay_ms: int = 1000
    task_id: str = field(default_factory=lambda: uuid.uuid4().hex[:12])
    state: TaskState = TaskState.PENDING

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")
        if self.max_pages < 1:
            raise ValueError("max_pages must be positive")
        if self.per_host_delay_ms < 0:
            raise ValueError("per_host_delay_ms must be non-negative")
        self._cancel = threading.Event()

    def start(self):
        if self.state is not TaskState.PENDING:
            raise TaskNotRunning(f"task {self.task_id} is {self.state.value}, not Pending")
        if not self.seed_urls:
            raise ValueError("a crawl task needs at least one seed URL to run")
        self.state = TaskState.RUNNING

    def cancel(self):
        """Request cancellation. Terminal tasks are left untouched."""
        if self.state in (TaskState.PENDING, TaskState.RUNNING):
            self._cancel.set()
            if self.state is TaskState.PENDING:
                self.state = TaskState.ABORTED

    @property
    def cancel_requested(self) -> bool:
        return self._cancel.is_set()


@dataclass(frozen=True)
class FrontierEntry:
    url: str
    depth: int = 0
    discovered_from: str | None = None
    kind: str = "page"  # "page" or "probe"


def host_of(url: str) -> str:
    return urlsplit(url).netloc


class Frontier:
    """Deduplicating URL queue with per-host politeness.

    Among entries whose host may be fetched again, the lowest depth wins,
    then insertion order. Popping an entry records its host as fetched at
    ``now``. All mutation happens under one lock, so workers may share it.
    """

    def __init__(self, task: CrawlTask):
        self.task = task
        self._lock = threading.Lock()
        self._seen: set[str] = set()
        self._by_host: dict[str, list] = {}
        self._last_fetch: dict[str, float] = {}
        self._seq = itertools.count()
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, entry: FrontierEntry) -> bool:
        if self.task.state is not TaskState.RUNNING:
            raise TaskNotRunning(f"task {self.task.task_id} is {self.task.state.value}")
        with self._lock:
            if entry.url in self._seen or entry.depth > self.task.max_depth:
                return False
            self._seen.add(entry.url)
            heap = self._by_host.setdefault(host_of(entry.url), [])
            heapq.heappush(heap, (entry.depth, next(self._seq), entry))
            self._size += 1
            return True

    def _eligible_at(self, host: str) -> float:
        last = self._last_fetch.get(host)
        return float("-inf") if last is None else last + self.task.per_host_delay_ms

    def pop(self, now: float) -> FrontierEntry | None:
        with self._lock:
            best = None
            for host, heap in self._by_host.items():
                if heap and self._eligible_at(host) <= now:
                    if best is None or heap[0][:2] < self._by_host[best][0][:2]:
                        best = host
            if best is None:
                return None
            _, _, entry = heapq.heappop(self._by_host[best])
            self._last_fetch[best] = now
            self._size -= 1
            return entry

    def next_ready_time(self) -> float | None:
        """Earliest time at which some queued entry becomes poppable."""
        with self._lock:
            times = [self._eligible_at(h) for h, heap in self._by_host.items() if heap]
            return min(times) if times else None

    def seen(self, url: str) -> bool:
        with self._lock:
            return url in self._seen
