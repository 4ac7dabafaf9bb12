"""HTTP transports and clocks.

Everything that talks to the network goes through a transport with a single
``request(url, timeout)`` method, so tests can substitute an in-process
simulated web and a manual clock.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx
import yaml

from atmocat.crawl.urls import normalize_url
from atmocat.errors import MalformedUrl, TransportError, TransportTimeout

DEFAULT_TIMEOUT_S = 10.0
USER_AGENT = "atmocat/0.1 (+ogc service discovery)"


@dataclass
class Response:
    status: int
    headers: dict[str, str]
    body: bytes

    @property
    def content_type(self) -> str:
        for key, value in self.headers.items():
            if key.lower() == "content-type":
                return value
        return ""


class Transport(Protocol):
    def request(self, url: str, timeout: float = DEFAULT_TIMEOUT_S) -> Response: ...


class Clock(Protocol):
    def now(self) -> float:
        """Current time in milliseconds."""

    def sleep(self, ms: float) -> None: ...


class SystemClock:
    """Wall clock in epoch milliseconds."""

    def now(self) -> float:
        return time.time() * 1000.0

    def sleep(self, ms: float) -> None:
        if ms > 0:
            time.sleep(ms / 1000.0)


class ManualClock:
    """Deterministic clock; ``sleep`` advances time instantly."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)
        self._lock = threading.Lock()

    def now(self) -> float:
        with self._lock:
            return self._now

    def sleep(self, ms: float) -> None:
        self.advance(ms)

    def advance(self, ms: float) -> None:
        if ms > 0:
            with self._lock:
                self._now += ms


class HttpTransport:
    """Real network transport backed by httpx."""

    def __init__(self, user_agent: str = USER_AGENT, max_bytes: int = 32 * 1024 * 1024):
        self.max_bytes = max_bytes
        self._client = httpx.Client(follow_redirects=True, headers={"User-Agent": user_agent})

    def request(self, url: str, timeout: float = DEFAULT_TIMEOUT_S) -> Response:
        try:
            with self._client.stream("GET", url, timeout=timeout) as resp:
                chunks, size = [], 0
                for chunk in resp.iter_bytes():
                    chunks.append(chunk)
                    size += len(chunk)
                    if size > self.max_bytes:
                        break
                return Response(resp.status_code, dict(resp.headers), b"".join(chunks))
        except httpx.TimeoutException as exc:
            raise TransportTimeout(f"timeout fetching {url}") from exc
        except httpx.HTTPError as exc:
            raise TransportError(f"network error fetching {url}: {exc}") from exc

    def close(self):
        self._client.close()


@dataclass
class SimulatedResource:
    status: int = 200
    content_type: str = "text/html"
    body: bytes = b""
    latency_ms: float = 0.0
    timeout: bool = False
    network_error: bool = False


@dataclass
class SimulatedWeb:
    """In-process web: a mapping from canonical URL to a canned resource.

    Each request advances the attached clock by the resource latency and is
    appended to ``log`` as ``(time_ms, url)``. Unknown URLs answer 404.
    """

    resources: dict[str, SimulatedResource] = field(default_factory=dict)
    clock: Clock | None = None
    log: list[tuple[float, str]] = field(default_factory=list)

    def add(self, url: str, body: bytes | str = b"", content_type: str = "text/html",
            status: int = 200, latency_ms: float = 0.0, **flags) -> None:
        if isinstance(body, str):
            body = body.encode("utf-8")
        self.resources[normalize_url(url)] = SimulatedResource(
            status, content_type, body, latency_ms, **flags)

    def request(self, url: str, timeout: float = DEFAULT_TIMEOUT_S) -> Response:
        try:
            key = normalize_url(url)
        except MalformedUrl as exc:
            raise TransportError(str(exc)) from None
        if self.clock is not None:
            self.log.append((self.clock.now(), key))
        else:
            self.log.append((0.0, key))
        res = self.resources.get(key)
        if res is None:
            return Response(404, {"Content-Type": "text/plain"}, b"not found")
        if res.timeout:
            if self.clock is not None:
                self.clock.sleep(timeout * 1000.0)
            raise TransportTimeout(f"timeout fetching {key}")
        if self.clock is not None:
            self.clock.sleep(res.latency_ms)
        if res.network_error:
            raise TransportError(f"connection reset fetching {key}")
        return Response(res.status, {"Content-Type": res.content_type}, res.body)

    def fetched_urls(self) -> list[str]:
        return [url for _, url in self.log]

    @classmethod
    def from_manifest(cls, path: str | Path, clock: Clock | None = None) -> "SimulatedWeb":
        """Load a site description.

        The manifest is YAML with a ``resources`` list; each item has ``url``
        and either inline ``body`` or a ``file`` relative to the manifest,
        plus optional ``content_type``, ``status``, ``latency_ms``,
        ``timeout`` and ``network_error``.
        """
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        web = cls(clock=clock)
        for item in data.get("resources", []):
            if "file" in item:
                body = (path.parent / item["file"]).read_bytes()
            else:
                body = item.get("body", "")
            web.add(
                item["url"], body,
                content_type=item.get("content_type", "text/html"),
                status=item.get("status", 200),
                latency_ms=item.get("latency_ms", 0.0),
                timeout=item.get("timeout", False),
                network_error=item.get("network_error", False),
            )
        return web
