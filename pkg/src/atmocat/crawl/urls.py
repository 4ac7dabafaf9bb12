"""URL canonicalisation, hyperlink extraction and OWS probe derivation."""

from __future__ import annotations

import fnmatch
from dataclasses import dataclass, field
from html.parser import HTMLParser
from importlib import resources
from urllib.parse import urljoin, urlsplit, urlunsplit

import yaml

from atmocat.errors import MalformedUrl

DEFAULT_PORTS = {"http": 80, "https": 443}
SERVICE_TYPES = ("WMS", "WFS", "WCS", "WPS", "CSW")


def _remove_dot_segments(path: str) -> str:
    # RFC 3986, section 5.2.4
    output: list[str] = []
    segments = path.split("/")
    for i, seg in enumerate(segments):
        last = i == len(segments) - 1
        if seg == ".":
            if last:
                output.append("")
            continue
        if seg == "..":
            if len(output) > 1:
                output.pop()
            if last:
                output.append("")
            continue
        output.append(seg)
    result = "/".join(output)
    if path.startswith("/") and not result.startswith("/"):
        result = "/" + result
    return result


def split_query(query: str) -> list[tuple[str, str]]:
    """Split a raw query string into (key, value) pairs without decoding."""
    pairs = []
    for part in query.split("&"):
        if not part:
            continue
        key, _, value = part.partition("=")
        pairs.append((key, value))
    return pairs


def join_query(pairs) -> str:
    return "&".join(f"{k}={v}" for k, v in pairs)


def normalize_url(raw: str, base: str | None = None) -> str:
    """Return the canonical form of ``raw``, resolved against ``base`` if given.

    Scheme and host are lowercased, default ports dropped, dot-segments
    resolved and the fragment removed. Query keys are lowercased and the
    pairs stably sorted by key; values are kept verbatim.
    """
    if not isinstance(raw, str):
        raise MalformedUrl(f"not a string: {raw!r}")
    text = raw.strip()
    if not text or any(c.isspace() for c in text):
        raise MalformedUrl(f"cannot parse URL {raw!r}")
    try:
        if base is not None:
            text = urljoin(base, text)
        parts = urlsplit(text)
        port = parts.port
    except ValueError as exc:
        raise MalformedUrl(f"cannot parse URL {raw!r}: {exc}") from None
    scheme = parts.scheme.lower()
    host = (parts.hostname or "").lower()
    if not scheme or not host:
        raise MalformedUrl(f"not an absolute URL: {raw!r}")
    if ":" in host:
        host = f"[{host}]"
    netloc = host
    if parts.username is not None:
        userinfo = parts.username
        if parts.password is not None:
            userinfo += ":" + parts.password
        netloc = f"{userinfo}@{host}"
    if port is not None and DEFAULT_PORTS.get(scheme) != port:
        netloc += f":{port}"
    path = _remove_dot_segments(parts.path) if parts.path else ""
    if not path and scheme in DEFAULT_PORTS:
        path = "/"
    pairs = [(k.lower(), v) for k, v in split_query(parts.query)]
    pairs.sort(key=lambda kv: kv[0])
    return urlunsplit((scheme, netloc, path, join_query(pairs), ""))


def query_pairs(url: str) -> list[tuple[str, str]]:
    return split_query(urlsplit(url).query)


def strip_ows_params(url: str) -> str:
    """Drop ``service``, ``request`` and ``version`` from a URL's query."""
    parts = urlsplit(url)
    pairs = [(k, v) for k, v in split_query(parts.query)
             if k.lower() not in ("service", "request", "version")]
    return urlunsplit((parts.scheme, parts.netloc, parts.path, join_query(pairs), ""))


def with_params(url: str, **params) -> str:
    """Set (replace) query parameters on ``url``; keys are matched case-insensitively."""
    parts = urlsplit(url)
    wanted = {k.lower(): v for k, v in params.items()}
    pairs = [(k, v) for k, v in split_query(parts.query) if k.lower() not in wanted]
    pairs.extend(wanted.items())
    return urlunsplit((parts.scheme, parts.netloc, parts.path, join_query(pairs), ""))


class _AnchorCollector(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.hrefs: list[str] = []
        self.base_href: str | None = None

    def handle_starttag(self, tag, attrs):
        if tag == "a":
            for name, value in attrs:
                if name == "href" and value:
                    self.hrefs.append(value)
        elif tag == "base" and self.base_href is None:
            for name, value in attrs:
                if name == "href" and value:
                    self.base_href = value


def extract_links(html: bytes | str, base: str) -> set[str]:
    """Collect canonical http(s) URLs from the anchors of an HTML page."""
    if isinstance(html, bytes):
        html = html.decode("utf-8", errors="replace")
    collector = _AnchorCollector()
    try:
        collector.feed(html)
        collector.close()
    except Exception:  # html.parser is lenient; keep whatever was collected
        pass
    effective_base = base
    if collector.base_href:
        try:
            effective_base = normalize_url(collector.base_href, base)
        except MalformedUrl:
            pass
    links = set()
    for href in collector.hrefs:
        try:
            url = normalize_url(href, effective_base)
        except MalformedUrl:
            continue
        if urlsplit(url).scheme in ("http", "https"):
            links.add(url)
    return links


@dataclass
class ProbePatterns:
    """Path-segment glob patterns and the service types each one implies."""

    rules: list[tuple[str, tuple[str, ...]]] = field(default_factory=list)

    @classmethod
    def from_mapping(cls, data) -> "ProbePatterns":
        rules = []
        for entry in data.get("patterns", []):
            types = tuple(t.upper() for t in entry["services"])
            unknown = set(types) - set(SERVICE_TYPES)
            if unknown:
                raise ValueError(f"unknown service types in probe config: {sorted(unknown)}")
            rules.append((entry["segment"].lower(), types))
        return cls(rules)

    @classmethod
    def from_file(cls, path) -> "ProbePatterns":
        with open(path, encoding="utf-8") as fh:
            return cls.from_mapping(yaml.safe_load(fh) or {})

    @classmethod
    def default(cls) -> "ProbePatterns":
        text = resources.files("atmocat.data").joinpath("probe_patterns.yaml").read_text("utf-8")
        return cls.from_mapping(yaml.safe_load(text))

    def services_for(self, path: str) -> list[str]:
        """Service types implied by the last non-empty segment of ``path``."""
        segments = [s.lower() for s in path.split("/") if s]
        if not segments:
            return []
        found: list[str] = []
        for pattern, types in self.rules:
            if fnmatch.fnmatchcase(segments[-1], pattern):
                found.extend(t for t in types if t not in found)
        return found


_DEFAULT_PATTERNS: ProbePatterns | None = None


def _default_patterns() -> ProbePatterns:
    global _DEFAULT_PATTERNS
    if _DEFAULT_PATTERNS is None:
        _DEFAULT_PATTERNS = ProbePatterns.default()
    return _DEFAULT_PATTERNS


def derive_ows_probes(url: str, patterns: ProbePatterns | None = None) -> list[str]:
    """Candidate GetCapabilities URLs for a link, or ``[]`` if it does not look like an OWS."""
    patterns = patterns or _default_patterns()
    keys = {k.lower() for k, _ in query_pairs(url)}
    if "service" in keys:
        return [normalize_url(with_params(url, request="GetCapabilities"))]
    probes = []
    for service in patterns.services_for(urlsplit(url).path):
        probe = with_params(url, service=service, request="GetCapabilities")
        probes.append(normalize_url(probe))
    return probes

