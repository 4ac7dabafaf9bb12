"""HTTP service: a CSW-style catalogue endpoint plus JSON search, stats, harvest and crawl control."""

from __future__ import annotations

import hmac
import logging
import xml.etree.ElementTree as ET
from typing import Any

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from starlette.exceptions import HTTPException as StarletteHTTPException

from atmocat import __version__
from atmocat.config import Config
from atmocat.cql.evaluate import evaluate
from atmocat.cql.parser import parse_cql
from atmocat.cql.search import SearchQuery, search, thumbnail_url
from atmocat.crawl.engine import CrawlManager
from atmocat.crawl.frontier import CrawlTask
from atmocat.crawl.transport import Clock, HttpTransport, SystemClock, Transport
from atmocat.crawl.urls import normalize_url
from atmocat.errors import (
    CapabilitiesError, CqlSyntaxError, FetchFailed, InvalidK, InvalidQuery, MalformedUrl,
)
from atmocat.harvest import Harvester
from atmocat.stats import classify_countries, country_counts, providers_dict, top_providers
from atmocat.store import Catalogue

log = logging.getLogger(__name__)

NS = {
    "csw": "http://www.opengis.net/cat/csw/2.0.2",
    "ows": "http://www.opengis.net/ows",
    "dc": "http://purl.org/dc/elements/1.1/",
    "dct": "http://purl.org/dc/terms/",
    "xlink": "http://www.w3.org/1999/xlink",
}
for _prefix, _uri in NS.items():
    ET.register_namespace(_prefix, _uri)

STATUS = {"InvalidParameter": 400, "NotFound": 404, "OperationNotSupported": 400, "Internal": 500}
CSW_OPERATIONS = ("GetCapabilities", "GetRecords", "GetRecordById", "Harvest")
XML_TYPE = "application/xml"
DEFAULT_MAX_RECORDS = 10
MAX_RECORDS = 1000


class ApiError(Exception):
    def __init__(self, code: str, message: str, locator: str | None = None, status: int | None = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.locator = locator
        self.status = status or STATUS[code]

    def body(self) -> dict:
        return {"error": {"code": self.code, "message": self.message, "locator": self.locator}}


def _error_response(err: ApiError) -> JSONResponse:
    return JSONResponse(err.body(), status_code=err.status)


def _q(ns: str, tag: str) -> str:
    return f"{{{NS[ns]}}}{tag}"


def _sub(parent, ns: str, tag: str, text: Any = None, **attrs):
    el = ET.SubElement(parent, _q(ns, tag), {k: str(v) for k, v in attrs.items()})
    if text is not None:
        el.text = str(text)
    return el


def capabilities_document(info) -> bytes:
    root = ET.Element(_q("csw", "Capabilities"), {"version": "2.0.2"})
    ident = _sub(root, "ows", "ServiceIdentification")
    _sub(ident, "ows", "Title", info.title)
    _sub(ident, "ows", "Abstract", info.abstract)
    _sub(ident, "ows", "ServiceType", "CSW")
    _sub(ident, "ows", "ServiceTypeVersion", "2.0.2")
    provider = _sub(root, "ows", "ServiceProvider")
    _sub(provider, "ows", "ProviderName", info.provider)
    ops = _sub(root, "ows", "OperationsMetadata")
    for name in CSW_OPERATIONS:
        op = _sub(ops, "ows", "Operation", name=name)
        http = _sub(_sub(op, "ows", "DCP"), "ows", "HTTP")
        _sub(http, "ows", "Get", **{f"{{{NS['xlink']}}}href": "/csw"})
        if name == "GetRecords":
            param = _sub(op, "ows", "Parameter", name="outputFormat")
            for fmt in ("application/xml", "application/json"):
                _sub(param, "ows", "Value", fmt)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


def record_dict(row: dict, full: bool = False) -> dict:
    rec = {
        "identifier": row["layerId"],
        "title": row["title"],
        "abstract": row["abstract"],
        "subjects": list(row["keywords"]),
        "bbox": list(row["bbox"]) if row["bbox"] else None,
        "source": row["serviceUrl"],
    }
    if full:
        rec.update({
            "name": row["name"],
            "serviceId": row["serviceId"],
            "serviceType": row["serviceType"],
            "serviceVersion": row["version"],
            "serviceTitle": row["serviceTitle"],
            "provider": row["providerName"],
            "country": row["country"],
            "formats": list(row["formats"]),
            "srs": list(row["srs"]),
            "timeExtent": [row["timeStart"], row["timeEnd"]] if row["timeStart"] else None,
            "qualityScore": row["qualityScore"],
            "thumbnailUrl": thumbnail_url(row),
        })
    return rec


def _record_xml(parent, rec: dict) -> None:
    el = _sub(parent, "csw", "Record")
    _sub(el, "dc", "identifier", rec["identifier"])
    _sub(el, "dc", "title", rec["title"])
    _sub(el, "dct", "abstract", rec["abstract"])
    for subject in rec["subjects"]:
        _sub(el, "dc", "subject", subject)
    if rec["bbox"]:
        box = _sub(el, "ows", "BoundingBox", crs="urn:ogc:def:crs:OGC:1.3:CRS84")
        _sub(box, "ows", "LowerCorner", f"{rec['bbox'][0]:g} {rec['bbox'][1]:g}")
        _sub(box, "ows", "UpperCorner", f"{rec['bbox'][2]:g} {rec['bbox'][3]:g}")
    _sub(el, "dc", "source", rec["source"])


def _int_param(params: dict, name: str, default: int | None, low: int | None = None,
               high: int | None = None) -> int | None:
    raw = params.get(name.lower())
    if raw is None or raw == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ApiError("InvalidParameter", f"{name} must be an integer", name) from None
    if (low is not None and value < low) or (high is not None and value > high):
        bounds = f"[{low}, {high}]" if high is not None else f">= {low}"
        raise ApiError("InvalidParameter", f"{name} must be {bounds}", name)
    return value


def _kvp(request: Request) -> dict[str, str]:
    # OGC key-value parameters are case-insensitive
    return {k.lower(): v for k, v in request.query_params.items()}


def _parse_constraint(text: str | None, locator: str):
    if text is None or not text.strip():
        return None
    try:
        return parse_cql(text)
    except CqlSyntaxError as exc:
        raise ApiError("InvalidParameter", str(exc), locator) from None


def create_app(store: Catalogue, config: Config | None = None, harvester: Harvester | None = None,
               transport: Transport | None = None, clock: Clock | None = None,
               crawl_manager: CrawlManager | None = None, seed_provider=None) -> FastAPI:
    """Build the service around an open catalogue.

    ``transport`` and ``clock`` default to real HTTP and wall time; tests pass a
    simulated web and a manual clock.
    """
    config = config or Config()
    transport = transport or HttpTransport()
    clock = clock or SystemClock()
    if harvester is None:
        harvester = Harvester(store, config.load_vocabulary(), config.threshold,
                              config.geo_resolver(), config.scoring)
    settings = config.crawl_settings()
    manager = crawl_manager or CrawlManager(transport, harvester, clock, settings)
    seeds = seed_provider or config.seed_provider()
    caps = capabilities_document(config.service)

    app = FastAPI(title="atmocat", version=__version__)
    app.state.store = store
    app.state.crawls = manager

    @app.exception_handler(ApiError)
    async def _api_error(request, exc: ApiError):
        return _error_response(exc)

    @app.exception_handler(RequestValidationError)
    async def _validation(request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        loc = [str(p) for p in first.get("loc", ()) if p not in ("body", "query", "path")]
        return _error_response(ApiError("InvalidParameter", first.get("msg", "invalid request"),
                                        ".".join(loc) or None))

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(request, exc: StarletteHTTPException):
        if exc.status_code == 404:
            return _error_response(ApiError("NotFound", "no such resource"))
        if exc.status_code == 405:
            return _error_response(ApiError("OperationNotSupported", "method not allowed",
                                            status=405))
        code = "Internal" if exc.status_code >= 500 else "InvalidParameter"
        return _error_response(ApiError(code, str(exc.detail), status=exc.status_code))

    @app.middleware("http")
    async def _no_leaks(request: Request, call_next):
        try:
            return await call_next(request)
        except Exception:
            log.exception("unhandled error on %s %s", request.method, request.url.path)
            return _error_response(ApiError("Internal", "internal error"))

    def require_token(request: Request) -> None:
        if not config.api_token:
            return
        header = request.headers.get("authorization", "")
        token = header[7:] if header.lower().startswith("bearer ") else \
            request.headers.get("x-api-token", "")
        if not hmac.compare_digest(token.encode(), config.api_token.encode()):
            raise ApiError("InvalidParameter", "missing or wrong API token", "Authorization",
                           status=401)

    def do_harvest(url: Any) -> dict:
        if not isinstance(url, str) or not url.strip():
            raise ApiError("InvalidParameter", "url is required", "url")
        try:
            outcome = harvester.harvest(url, transport, clock, settings.timeout_s)
        except MalformedUrl as exc:
            raise ApiError("InvalidParameter", f"malformed url: {exc}", "url") from None
        except FetchFailed as exc:
            raise ApiError("InvalidParameter", f"fetch failed: {exc}", "url") from None
        except CapabilitiesError as exc:
            raise ApiError("InvalidParameter", f"{type(exc).__name__}: {exc}", "url") from None
        return outcome.summary()

    # --- CSW --------------------------------------------------------------

    def get_records(params: dict) -> Response:
        expr = _parse_constraint(params.get("constraint"), "constraint")
        start = _int_param(params, "startPosition", 1, low=1)
        limit = _int_param(params, "maxRecords", DEFAULT_MAX_RECORDS, low=0, high=MAX_RECORDS)
        fmt = (params.get("outputformat") or XML_TYPE).lower()
        if fmt not in (XML_TYPE, "application/json", "json", "xml"):
            raise ApiError("InvalidParameter", f"unsupported outputFormat {fmt!r}", "outputFormat")
        rows = [r for r in store.layer_rows() if expr is None or evaluate(expr, r)]
        page = rows[start - 1:start - 1 + limit]
        next_record = start + len(page) if start - 1 + len(page) < len(rows) else 0
        records = [record_dict(r) for r in page]
        if "json" in fmt:
            return JSONResponse({"numberOfRecordsMatched": len(rows),
                                 "numberOfRecordsReturned": len(records),
                                 "nextRecord": next_record, "records": records})
        root = ET.Element(_q("csw", "GetRecordsResponse"), {"version": "2.0.2"})
        results = _sub(root, "csw", "SearchResults", numberOfRecordsMatched=len(rows),
                       numberOfRecordsReturned=len(records), nextRecord=next_record,
                       elementSet="full")
        for rec in records:
            _record_xml(results, rec)
        return Response(ET.tostring(root, encoding="utf-8", xml_declaration=True),
                        media_type=XML_TYPE)

    def get_record_by_id(params: dict) -> Response:
        raw = params.get("id")
        if not raw:
            raise ApiError("InvalidParameter", "id is required", "id")
        row = None
        if raw.strip().lstrip("-").isdigit():
            wanted = int(raw)
            row = next((r for r in store.layer_rows() if r["layerId"] == wanted), None)
        if row is None:
            raise ApiError("NotFound", f"no record with id {raw!r}", "id")
        rec = record_dict(row, full=True)
        if "json" in (params.get("outputformat") or "").lower():
            return JSONResponse(rec)
        root = ET.Element(_q("csw", "GetRecordByIdResponse"))
        _record_xml(root, rec)
        return Response(ET.tostring(root, encoding="utf-8", xml_declaration=True),
                        media_type=XML_TYPE)

    @app.get("/csw")
    def csw(request: Request):
        params = _kvp(request)
        op = params.get("request")
        if not op:
            raise ApiError("InvalidParameter", "request parameter is required", "request")
        op_key = op.lower()
        if op_key == "getcapabilities":
            return Response(caps, media_type=XML_TYPE)
        if op_key == "getrecords":
            return get_records(params)
        if op_key == "getrecordbyid":
            return get_record_by_id(params)
        if op_key == "harvest":
            require_token(request)
            return JSONResponse(do_harvest(params.get("source")))
        raise ApiError("OperationNotSupported", f"unknown request {op!r}", "request")

    # --- JSON -------------------------------------------------------------

    @app.post("/harvest")
    async def harvest(request: Request):
        require_token(request)
        try:
            body = await request.json()
        except ValueError:
            raise ApiError("InvalidParameter", "body must be JSON", "url") from None
        url = body.get("url") if isinstance(body, dict) else None
        return do_harvest(url)

    @app.get("/search")
    def json_search(request: Request):
        params = _kvp(request)
        expr = _parse_constraint(params.get("cql"), "cql")
        bbox = None
        if params.get("bbox"):
            try:
                bbox = tuple(float(v) for v in params["bbox"].split(","))
            except ValueError:
                raise ApiError("InvalidParameter", "bbox must be four numbers", "bbox") from None
        time_range = None
        if params.get("timestart") or params.get("timeend"):
            if not (params.get("timestart") and params.get("timeend")):
                raise ApiError("InvalidParameter", "timeStart and timeEnd go together", "timeRange")
            time_range = (params["timestart"], params["timeend"])
        formats = [f for f in (params.get("formats") or "").split(",") if f.strip()]
        try:
            q = SearchQuery(
                free_text=params.get("q") or params.get("freetext"),
                time_range=time_range,
                formats=[f.strip() for f in formats] or None,
                bbox=bbox,
                srs=params.get("srs") or None,
                cql=expr,
                offset=_int_param(params, "offset", 0),
                limit=_int_param(params, "limit", 20),
            )
        except InvalidQuery as exc:
            raise ApiError("InvalidParameter", str(exc), exc.locator) from None
        return search(store, q).to_dict()

    @app.get("/stats/countries")
    def stats_countries(request: Request):
        k = _int_param(_kvp(request), "k", 6, low=1)
        try:
            return classify_countries(country_counts(store), k).to_dict()
        except InvalidK as exc:
            raise ApiError("InvalidParameter", str(exc), "k") from None

    @app.get("/stats/providers")
    def stats_providers(request: Request):
        params = _kvp(request)
        n = _int_param(params, "n", 10, low=1)
        return providers_dict(top_providers(store, n, params.get("country") or None))

    # --- crawl control ----------------------------------------------------

    @app.post("/crawl", status_code=202)
    async def crawl_start(request: Request):
        require_token(request)
        try:
            body = await request.json()
        except ValueError:
            raise ApiError("InvalidParameter", "body must be JSON", None) from None
        if not isinstance(body, dict):
            raise ApiError("InvalidParameter", "body must be a JSON object", None)
        keywords = body.get("keywords") or []
        if isinstance(keywords, str):
            keywords = keywords.split()
        seed_urls = body.get("seeds") or []
        if not keywords and not seed_urls:
            raise ApiError("InvalidParameter", "keywords or seeds are required", "keywords")
        try:
            seed_urls = [normalize_url(u) for u in seed_urls] or seeds.seeds_for(list(keywords))
            if not seed_urls:
                raise ApiError("InvalidParameter", "no seed URLs found for the keywords",
                               "keywords")
            task = CrawlTask(
                keywords=list(keywords), seed_urls=seed_urls,
                max_depth=int(body.get("maxDepth", config.max_depth)),
                max_pages=int(body.get("maxPages", config.max_pages)),
                per_host_delay_ms=float(body.get("perHostDelayMs", config.per_host_delay_ms)),
            )
        except (MalformedUrl, ValueError, TypeError) as exc:
            raise ApiError("InvalidParameter", str(exc), "seeds") from None
        manager.start(task)
        return JSONResponse(manager.status(task.task_id), status_code=202)

    def _crawl_lookup(task_id: str):
        try:
            manager.get(task_id)
        except KeyError:
            raise ApiError("NotFound", f"no crawl task {task_id!r}", "id") from None

    @app.get("/crawl/{task_id}")
    def crawl_status(task_id: str):
        _crawl_lookup(task_id)
        return manager.status(task_id)

    @app.delete("/crawl/{task_id}")
    def crawl_cancel(task_id: str, request: Request):
        require_token(request)
        _crawl_lookup(task_id)
        return manager.cancel(task_id)

    return app
