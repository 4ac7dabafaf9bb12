"""Decide whether a fetched response is HTML, an OWS document, or neither."""

from __future__ import annotations

import enum
import re

SNIFF_BYTES = 4096


class DocKind(str, enum.Enum):
    HTML = "Html"
    OWS_CAPABILITIES = "OwsCapabilities"
    OWS_EXCEPTION = "OwsException"
    OTHER = "Other"


_EXCEPTION_ROOTS = {"serviceexceptionreport", "exceptionreport"}
# skip prolog, comments, doctype and processing instructions before the root
_PROLOG = re.compile(
    rb"""\A(?:\s+|<\?.*?\?>|<!--.*?-->|<!DOCTYPE(?:[^\[>]|\[.*?\])*>)*""",
    re.DOTALL | re.IGNORECASE,
)
_ROOT_TAG = re.compile(rb"<([A-Za-z_][\w.\-]*:)?([A-Za-z_][\w.\-]*)")
_HTML_HINT = re.compile(rb"<!DOCTYPE\s+html|<html[\s>]|<head[\s>]|<body[\s>]", re.IGNORECASE)


def _decode_prefix(prefix: bytes) -> bytes:
    # UTF-16 documents: transcode so the byte-level regexes apply
    for bom, codec in ((b"\xff\xfe", "utf-16-le"), (b"\xfe\xff", "utf-16-be")):
        if prefix.startswith(bom):
            return prefix[2:].decode(codec, errors="ignore").encode("utf-8")
    if prefix.startswith(b"\xef\xbb\xbf"):
        return prefix[3:]
    return prefix


def root_local_name(prefix: bytes) -> str | None:
    """Local name of the first element in an XML prefix, if one is visible."""
    body = _decode_prefix(prefix)
    m = _PROLOG.match(body)
    rest = body[m.end():] if m else body
    tag = _ROOT_TAG.match(rest)
    if tag is None:
        return None
    return tag.group(2).decode("ascii", errors="replace")


def classify_response(content_type: str | None, body_prefix: bytes) -> DocKind:
    """Classify using only the header and the first 4096 bytes of the body.

    Body evidence wins over the Content-Type header.
    """
    prefix = body_prefix[:SNIFF_BYTES]
    root = root_local_name(prefix)
    if root is not None:
        lowered = root.lower()
        if lowered.endswith("capabilities"):
            return DocKind.OWS_CAPABILITIES
        if lowered in _EXCEPTION_ROOTS:
            return DocKind.OWS_EXCEPTION
        if lowered == "html":
            return DocKind.HTML
    if _HTML_HINT.search(_decode_prefix(prefix)):
        return DocKind.HTML
    ctype = (content_type or "").split(";", 1)[0].strip().lower()
    if ctype in ("text/html", "application/xhtml+xml"):
        return DocKind.HTML
    return DocKind.OTHER
