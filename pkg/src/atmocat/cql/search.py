"""Faceted layer search and preview thumbnails."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, timezone
from urllib.parse import urlencode, urlsplit, urlunsplit

from atmocat.cql.ast import Expr
from atmocat.cql.evaluate import anytext, bbox_intersects, evaluate, like
from atmocat.crawl.urls import split_query
from atmocat.errors import InvalidQuery

MAX_LIMIT = 1000
WORLD = (-180.0, -90.0, 180.0, 90.0)
THUMB_WIDTH, THUMB_HEIGHT = 256, 128
WFS_PREVIEW_COUNT = 10


@dataclass(frozen=True)
class SearchQuery:
    free_text: str | None = None
    time_range: tuple[str, str] | None = None
    formats: tuple[str, ...] | None = None
    bbox: tuple[float, float, float, float] | None = None
    srs: str | None = None
    cql: Expr | None = None
    offset: int = 0
    limit: int = 20

    def __post_init__(self):
        if isinstance(self.limit, bool) or not isinstance(self.limit, int) \
                or not 1 <= self.limit <= MAX_LIMIT:
            raise InvalidQuery(f"limit must be an integer in [1, {MAX_LIMIT}]", "limit")
        if isinstance(self.offset, bool) or not isinstance(self.offset, int) or self.offset < 0:
            raise InvalidQuery("offset must be a non-negative integer", "offset")
        if self.formats is not None:
            object.__setattr__(self, "formats", tuple(self.formats))
        if self.time_range is not None:
            start, end = (_instant(t) for t in self.time_range)
            if start is None or end is None:
                raise InvalidQuery("time range bounds must be ISO dates", "timeRange")
            if start > end:
                raise InvalidQuery("time range start is after its end", "timeRange")
        if self.bbox is not None:
            if len(self.bbox) != 4:
                raise InvalidQuery("bbox needs four numbers", "bbox")
            min_lon, min_lat, max_lon, max_lat = (float(v) for v in self.bbox)
            if min_lon > max_lon or min_lat > max_lat:
                raise InvalidQuery("bbox minimum exceeds maximum", "bbox")
            object.__setattr__(self, "bbox", (min_lon, min_lat, max_lon, max_lat))

    @property
    def tokens(self) -> list[str]:
        return (self.free_text or "").split()


@dataclass(frozen=True)
class SearchResult:
    layer_id: int
    service_id: int
    title: str
    abstract: str
    quality_score: float
    thumbnail_url: str | None
    match_rank: float

    def to_dict(self) -> dict:
        return {
            "layerId": self.layer_id,
            "serviceId": self.service_id,
            "title": self.title,
            "abstract": self.abstract,
            "qualityScore": self.quality_score,
            "thumbnailUrl": self.thumbnail_url,
            "matchRank": self.match_rank,
        }


@dataclass(frozen=True)
class SearchPage:
    total: int
    offset: int
    results: list[SearchResult]

    def to_dict(self) -> dict:
        return {"total": self.total, "offset": self.offset,
                "results": [r.to_dict() for r in self.results]}


def _instant(value) -> datetime | None:
    if isinstance(value, datetime):
        dt = value
    elif isinstance(value, date):
        dt = datetime(value.year, value.month, value.day)
    elif isinstance(value, str):
        text = value.strip()
        if text.endswith("Z"):
            text = text[:-1] + "+00:00"
        try:
            dt = datetime.fromisoformat(text)
        except ValueError:
            return None
    else:
        return None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt


def text_matches(row: dict, token: str) -> bool:
    # tokens go into LIKE verbatim, so a literal % or _ in a token acts as a wildcard
    return like(anytext(row), f"%{token}%")


def match_rank(row: dict, tokens: list[str]) -> float:
    if not tokens:
        return 0.0
    title = row.get("title") or ""
    return sum(like(title, f"%{t}%") for t in tokens) / len(tokens)


def matches(row: dict, q: SearchQuery) -> bool:
    """True when ``row`` satisfies every facet of ``q``."""
    if not all(text_matches(row, t) for t in q.tokens):
        return False
    if q.formats:
        have = {f.casefold() for f in row.get("formats") or ()}
        if not any(f.casefold() in have for f in q.formats):
            return False
    if q.srs:
        if q.srs.casefold() not in {s.casefold() for s in row.get("srs") or ()}:
            return False
    if q.time_range:
        start, end = (_instant(row.get(k)) for k in ("timeStart", "timeEnd"))
        if start is None or end is None:
            return False
        q_start, q_end = (_instant(t) for t in q.time_range)
        if start > q_end or end < q_start:
            return False
    if q.bbox:
        box = row.get("bbox")
        if not box or not bbox_intersects(tuple(box), q.bbox):
            return False
    if q.cql is not None and not evaluate(q.cql, row):
        return False
    return True


def rank_rows(rows: list[dict], q: SearchQuery) -> list[tuple[float, dict]]:
    """All matching rows with their rank, in result order."""
    tokens = q.tokens
    hits = [(match_rank(r, tokens), r) for r in rows if matches(r, q)]
    hits.sort(key=lambda h: (-h[0], -(h[1].get("qualityScore") or 0.0), h[1]["layerId"]))
    return hits


def search(store, q: SearchQuery) -> SearchPage:
    hits = rank_rows(store.layer_rows(), q)
    page = hits[q.offset:q.offset + q.limit]
    results = [SearchResult(r["layerId"], r["serviceId"], r["title"], r["abstract"],
                            r.get("qualityScore") or 0.0, thumbnail_url(r), rank)
               for rank, r in page]
    return SearchPage(len(hits), q.offset, results)


def _base_url(url: str) -> str:
    parts = urlsplit(url)
    kept = [(k, v) for k, v in split_query(parts.query)
            if k.lower() not in ("service", "request", "version")]
    return urlunsplit((parts.scheme, parts.netloc, parts.path, urlencode(kept), ""))


def _bbox_text(values) -> str:
    return ",".join(repr(float(v)) if not float(v).is_integer() else str(int(v)) for v in values)


def thumbnail_url(row: dict) -> str | None:
    """Preview request for a WMS or WFS layer row; None for other service types.

    ``row`` is a flattened search row (see ``Catalogue.layer_rows``).
    """
    service_type = (row.get("serviceType") or "").upper()
    version = row.get("version") or ""
    name = row.get("name") or ""
    if service_type not in ("WMS", "WFS") or not name:
        return None
    base = _base_url(row.get("serviceUrl") or row.get("url") or "")
    sep = "&" if urlsplit(base).query else "?"
    box = tuple(row.get("bbox") or WORLD)
    if service_type == "WMS":
        params = [("service", "WMS"), ("version", version), ("request", "GetMap"),
                  ("layers", name), ("styles", "")]
        if version.startswith("1.3"):
            # 1.3.0 with EPSG:4326 uses latitude-first axis order
            params += [("CRS", "EPSG:4326"), ("bbox", _bbox_text((box[1], box[0], box[3], box[2])))]
        else:
            params += [("SRS", "EPSG:4326"), ("bbox", _bbox_text(box))]
        params += [("width", str(THUMB_WIDTH)), ("height", str(THUMB_HEIGHT)),
                   ("format", "image/png")]
    else:
        params = [("service", "WFS"), ("version", version), ("request", "GetFeature")]
        if version.startswith("2."):
            params += [("typeNames", name), ("count", str(WFS_PREVIEW_COUNT))]
        else:
            params += [("typeName", name), ("maxFeatures", str(WFS_PREVIEW_COUNT))]
    return base + sep + urlencode(params, safe=":/,")
