"""Parse OGC GetCapabilities documents into service and layer drafts.

Supported dialects: WMS 1.1.1/1.3.0, WFS 1.1.0/2.0.0, WCS 1.0.0/2.0.1 (and
the OWS-common based 1.1.x), CSW 2.0.2 and WPS 1.0.0. Elements are matched
by local name; namespaces are only used to tell apart the families that
share a ``Capabilities`` root.
"""

from __future__ import annotations

import enum
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from atmocat.crawl.urls import normalize_url
from atmocat.errors import MalformedUrl, MalformedXml, NotCapabilities, UnsupportedVersion

MAX_DOCUMENT_BYTES = 32 * 1024 * 1024


class ServiceType(str, enum.Enum):
    WMS = "WMS"
    WFS = "WFS"
    WCS = "WCS"
    CSW = "CSW"
    WPS = "WPS"


BBox = tuple[float, float, float, float]


@dataclass
class ServiceDraft:
    service_type: ServiceType
    version: str
    title: str = ""
    abstract: str = ""
    keywords: list[str] = field(default_factory=list)
    provider_name: str = ""
    contact: str | None = None
    capabilities_url: str = ""


@dataclass
class LayerDraft:
    name: str
    title: str = ""
    abstract: str = ""
    keywords: list[str] = field(default_factory=list)
    bounding_box: BBox | None = None
    supported_srs: list[str] = field(default_factory=list)
    formats: list[str] = field(default_factory=list)
    time_extent: tuple[str, str] | None = None


# --- element helpers -------------------------------------------------------

def _local(tag) -> str:
    if not isinstance(tag, str):
        return ""
    return tag.rsplit("}", 1)[-1]


def _ns(tag) -> str:
    if isinstance(tag, str) and tag.startswith("{"):
        return tag[1:].split("}", 1)[0]
    return ""


def _children(el, name: str):
    if el is None:
        return []
    return [c for c in el if _local(c.tag) == name]


def _child(el, name: str):
    for c in _children(el, name):
        return c
    return None


def _find(el, *path):
    for name in path:
        el = _child(el, name)
        if el is None:
            return None
    return el


def _text(el, *path) -> str:
    node = _find(el, *path) if path else el
    if node is None or node.text is None:
        return ""
    return " ".join(node.text.split())


def _texts(el, *path) -> list[str]:
    """Non-empty, de-duplicated texts of all elements matching the last path step."""
    *parents, last = path
    node = _find(el, *parents) if parents else el
    out: list[str] = []
    for c in _children(node, last):
        t = _text(c)
        if t and t not in out:
            out.append(t)
    return out


def _float(value) -> float | None:
    try:
        f = float(value)
    except (TypeError, ValueError):
        return None
    if f != f or f in (float("inf"), float("-inf")):
        return None
    return f


def _valid_bbox(min_lon, min_lat, max_lon, max_lat) -> BBox | None:
    vals = [_float(v) for v in (min_lon, min_lat, max_lon, max_lat)]
    if any(v is None for v in vals):
        return None
    w, s, e, n = vals
    if w > e or s > n or s < -90 or n > 90 or w < -180 or e > 180:
        return None
    return (w, s, e, n)


def _corner_bbox(el) -> BBox | None:
    """OWS WGS84BoundingBox or gml envelope with lower/upper "lon lat" corners."""
    if el is None:
        return None
    lower = _text(el, "LowerCorner").split()
    upper = _text(el, "UpperCorner").split()
    if len(lower) == 2 and len(upper) == 2:
        return _valid_bbox(lower[0], lower[1], upper[0], upper[1])
    positions = [_text(p).split() for p in _children(el, "pos")]
    if len(positions) == 2 and all(len(p) == 2 for p in positions):
        return _valid_bbox(positions[0][0], positions[0][1], positions[1][0], positions[1][1])
    return None


def _time_extent(value: str) -> tuple[str, str] | None:
    value = value.strip()
    if not value:
        return None
    items = [v.strip() for v in value.split(",") if v.strip()]
    if not items:
        return None
    start = items[0].split("/")[0].strip()
    last = items[-1].split("/")
    end = (last[1] if len(last) > 1 else last[0]).strip()
    if not start or not end:
        return None
    return (start, end)


# --- detection -------------------------------------------------------------

_ENTITY_DECL = re.compile(rb"<!ENTITY", re.IGNORECASE)


def _parse_root(xml: bytes):
    if not isinstance(xml, (bytes, bytearray)):
        raise MalformedXml("capabilities input must be bytes")
    if len(xml) > MAX_DOCUMENT_BYTES:
        raise MalformedXml(f"document larger than {MAX_DOCUMENT_BYTES} bytes")
    if _ENTITY_DECL.search(xml):
        raise MalformedXml("entity declarations are not accepted")
    try:
        return ET.fromstring(bytes(xml))
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from None
    except (LookupError, ValueError, UnicodeError) as exc:
        raise MalformedXml(f"undecodable document: {exc}") from None


_CAPABILITIES_NS = (
    ("opengis.net/wcs", ServiceType.WCS),
    ("opengis.net/cat/csw", ServiceType.CSW),
    ("opengis.net/wps", ServiceType.WPS),
    ("opengis.net/wfs", ServiceType.WFS),
    ("opengis.net/wms", ServiceType.WMS),
)
_ROOTS = {
    "WMS_Capabilities": ServiceType.WMS,
    "WMT_MS_Capabilities": ServiceType.WMS,
    "WFS_Capabilities": ServiceType.WFS,
    "WCS_Capabilities": ServiceType.WCS,
}


def _kind_of_root(root) -> ServiceType:
    local, ns = _local(root.tag), _ns(root.tag)
    if local in _ROOTS:
        kind = _ROOTS[local]
        # a foreign namespace on a well-known root is not an OGC document
        if ns and "opengis.net" not in ns:
            raise NotCapabilities(f"unexpected namespace {ns!r} on {local}")
        return kind
    if local == "Capabilities":
        for fragment, kind in _CAPABILITIES_NS:
            if fragment in ns:
                return kind
        declared = (root.get("service") or "").upper()
        if not ns and declared in ServiceType.__members__:
            return ServiceType(declared)
    raise NotCapabilities(f"unrecognised root element {local or root.tag!r}")


def detect_service_kind(xml: bytes) -> tuple[ServiceType, str]:
    """Service family and version declared by a capabilities document."""
    root = _parse_root(xml)
    return _kind_of_root(root), (root.get("version") or "").strip()


# --- service metadata ------------------------------------------------------

def _ows_service(root, draft: ServiceDraft) -> None:
    ident = _child(root, "ServiceIdentification")
    draft.title = _text(ident, "Title")
    draft.abstract = _text(ident, "Abstract")
    draft.keywords = []
    for kw_block in _children(ident, "Keywords"):
        for kw in _texts(kw_block, "Keyword"):
            if kw not in draft.keywords:
                draft.keywords.append(kw)
    provider = _child(root, "ServiceProvider")
    draft.provider_name = _text(provider, "ProviderName")
    contact = _child(provider, "ServiceContact")
    person = _text(contact, "IndividualName")
    email = _text(contact, "ContactInfo", "Address", "ElectronicMailAddress")
    draft.contact = person or email or None


def _wms_service(root, draft: ServiceDraft) -> None:
    svc = _child(root, "Service")
    draft.title = _text(svc, "Title")
    draft.abstract = _text(svc, "Abstract")
    draft.keywords = _texts(svc, "KeywordList", "Keyword")
    info = _child(svc, "ContactInformation")
    primary = _child(info, "ContactPersonPrimary")
    draft.provider_name = _text(primary, "ContactOrganization")
    person = _text(primary, "ContactPerson")
    email = _text(info, "ContactElectronicMailAddress")
    draft.contact = person or email or None


def _wcs10_service(root, draft: ServiceDraft) -> None:
    svc = _child(root, "Service")
    draft.title = _text(svc, "label") or _text(svc, "name")
    draft.abstract = _text(svc, "description")
    draft.keywords = []
    for block in _children(svc, "keywords"):
        for kw in _texts(block, "keyword"):
            if kw not in draft.keywords:
                draft.keywords.append(kw)
    party = _child(svc, "responsibleParty")
    draft.provider_name = _text(party, "organisationName")
    draft.contact = _text(party, "individualName") or None


# --- layers ----------------------------------------------------------------

def _wms_formats(root) -> list[str]:
    return _texts(_find(root, "Capability", "Request", "GetMap"), "Format")


def _wms_layer_bbox(layer, legacy: bool) -> BBox | None:
    geo = _child(layer, "EX_GeographicBoundingBox")
    if geo is not None:
        return _valid_bbox(_text(geo, "westBoundLongitude"), _text(geo, "southBoundLatitude"),
                           _text(geo, "eastBoundLongitude"), _text(geo, "northBoundLatitude"))
    ll = _child(layer, "LatLonBoundingBox")
    if ll is not None:
        return _valid_bbox(ll.get("minx"), ll.get("miny"), ll.get("maxx"), ll.get("maxy"))
    return None


def _wms_layer_time(layer) -> str | None:
    for tag in ("Dimension", "Extent"):
        for el in _children(layer, tag):
            if (el.get("name") or "").lower() == "time":
                value = el.text or el.get("default") or ""
                if value.strip():
                    return value
    return None


def _wms_layers(root, version: str) -> list[LayerDraft]:
    legacy = not version.startswith("1.3")
    srs_tag = "SRS" if legacy else "CRS"
    formats = _wms_formats(root)
    drafts: list[LayerDraft] = []
    top = _children(_child(root, "Capability"), "Layer")

    # iterative walk: (element, inherited bbox, inherited srs, inherited time)
    stack = [(el, None, [], None) for el in reversed(top)]
    while stack:
        el, bbox, srs, time_value = stack.pop()
        own_bbox = _wms_layer_bbox(el, legacy)
        bbox = own_bbox if own_bbox is not None else bbox
        srs = list(srs)
        for code in _texts(el, srs_tag):
            for token in code.split():
                if token not in srs:
                    srs.append(token)
        time_value = _wms_layer_time(el) or time_value
        children = _children(el, "Layer")
        if children:
            stack.extend((c, bbox, srs, time_value) for c in reversed(children))
            continue
        name = _text(el, "Name")
        if not name:
            continue
        drafts.append(LayerDraft(
            name=name,
            title=_text(el, "Title"),
            abstract=_text(el, "Abstract"),
            keywords=_texts(el, "KeywordList", "Keyword"),
            bounding_box=bbox,
            supported_srs=srs,
            formats=list(formats),
            time_extent=_time_extent(time_value) if time_value else None,
        ))
    return drafts


def _ows_keywords(el) -> list[str]:
    out: list[str] = []
    for block in _children(el, "Keywords"):
        for kw in _texts(block, "Keyword"):
            if kw not in out:
                out.append(kw)
    return out


def _operation_parameter(root, operation: str, parameter: str) -> list[str]:
    ops = _child(root, "OperationsMetadata")
    for op in _children(ops, "Operation"):
        if op.get("name") != operation:
            continue
        for param in _children(op, "Parameter"):
            if (param.get("name") or "").lower() == parameter.lower():
                values = _texts(param, "Value")
                values += [v for v in _texts(_child(param, "AllowedValues"), "Value")
                           if v not in values]
                return values
    return []


def _wfs_layers(root) -> list[LayerDraft]:
    default_formats = _operation_parameter(root, "GetFeature", "outputFormat")
    drafts = []
    for ft in _children(_child(root, "FeatureTypeList"), "FeatureType"):
        name = _text(ft, "Name")
        if not name:
            continue
        srs: list[str] = []
        for tag in ("DefaultSRS", "DefaultCRS", "SRS", "OtherSRS", "OtherCRS"):
            for value in _texts(ft, tag):
                if value not in srs:
                    srs.append(value)
        formats = _texts(_child(ft, "OutputFormats"), "Format") or list(default_formats)
        bbox = _corner_bbox(_child(ft, "WGS84BoundingBox"))
        if bbox is None:
            ll = _child(ft, "LatLongBoundingBox")
            if ll is not None:
                bbox = _valid_bbox(ll.get("minx"), ll.get("miny"), ll.get("maxx"), ll.get("maxy"))
        drafts.append(LayerDraft(
            name=name,
            title=_text(ft, "Title"),
            abstract=_text(ft, "Abstract"),
            keywords=_ows_keywords(ft),
            bounding_box=bbox,
            supported_srs=srs,
            formats=formats,
        ))
    return drafts


def _wcs10_layers(root) -> list[LayerDraft]:
    drafts = []
    for cov in _children(_child(root, "ContentMetadata"), "CoverageOfferingBrief"):
        name = _text(cov, "name")
        if not name:
            continue
        keywords: list[str] = []
        for block in _children(cov, "keywords"):
            keywords += [k for k in _texts(block, "keyword") if k not in keywords]
        envelope = _child(cov, "lonLatEnvelope")
        time_extent = None
        if envelope is not None:
            times = _texts(envelope, "timePosition")
            if times:
                time_extent = (times[0], times[-1])
        srs = []
        if envelope is not None and envelope.get("srsName"):
            srs.append(envelope.get("srsName"))
        drafts.append(LayerDraft(
            name=name,
            title=_text(cov, "label"),
            abstract=_text(cov, "description"),
            keywords=keywords,
            bounding_box=_corner_bbox(envelope),
            supported_srs=srs,
            time_extent=time_extent,
        ))
    return drafts


def _wcs_ows_layers(root) -> list[LayerDraft]:
    formats = _texts(_child(root, "ServiceMetadata"), "formatSupported")
    formats += [f for f in _operation_parameter(root, "GetCoverage", "format") if f not in formats]
    drafts = []
    for summary in _children(_child(root, "Contents"), "CoverageSummary"):
        name = _text(summary, "CoverageId") or _text(summary, "Identifier")
        if not name:
            continue
        srs = _texts(summary, "SupportedCRS")
        drafts.append(LayerDraft(
            name=name,
            title=_text(summary, "Title"),
            abstract=_text(summary, "Abstract"),
            keywords=_ows_keywords(summary),
            bounding_box=_corner_bbox(_child(summary, "WGS84BoundingBox")),
            supported_srs=srs,
            formats=list(formats),
        ))
    return drafts


_SUPPORTED = {
    ServiceType.WMS: ("1.1", "1.3"),
    ServiceType.WFS: ("1.1", "2.0"),
    ServiceType.WCS: ("1.0", "1.1", "2.0"),
    ServiceType.CSW: ("2.0",),
    ServiceType.WPS: ("1.0",),
}


def parse_capabilities(xml: bytes, source_url: str) -> tuple[ServiceDraft, list[LayerDraft]]:
    """Parse a capabilities document fetched from ``source_url``.

    Raises MalformedXml, NotCapabilities or UnsupportedVersion; nothing else.
    """
    root = _parse_root(xml)
    kind = _kind_of_root(root)
    version = (root.get("version") or "").strip()
    if not re.fullmatch(r"\d+\.\d+(\.\d+)?", version):
        raise UnsupportedVersion(f"{kind.value} document without a usable version: {version!r}")
    dialect = ".".join(version.split(".")[:2])
    if dialect not in _SUPPORTED[kind]:
        raise UnsupportedVersion(f"{kind.value} {version} is not a supported dialect")
    try:
        url = normalize_url(source_url)
    except MalformedUrl:
        url = source_url

    draft = ServiceDraft(service_type=kind, version=version, capabilities_url=url)
    layers: list[LayerDraft] = []
    if kind is ServiceType.WMS:
        _wms_service(root, draft)
        layers = _wms_layers(root, version)
    elif kind is ServiceType.WFS:
        _ows_service(root, draft)
        layers = _wfs_layers(root)
    elif kind is ServiceType.WCS:
        if dialect == "1.0":
            _wcs10_service(root, draft)
            layers = _wcs10_layers(root)
        else:
            _ows_service(root, draft)
            layers = _wcs_ows_layers(root)
    else:
        _ows_service(root, draft)
    return draft, layers
