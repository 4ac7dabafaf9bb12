"""Relational catalogue of services, layers, users, workspaces and analysis profiles.

Backed by SQLite. Tables mirror the portal database: ``data_source_catalogue``
(services), ``layer`` and ``layer_metadata`` (one-to-one on ``layer_id``),
``user_profile``, ``workspace`` (a single encoded ``workspacedata`` column)
and ``data_analysis``. ``workspace_layer`` is an index of the links held in
``workspacedata`` so integrity checks can be done in SQL; ``probe_sample``
keeps the latency history used for scoring. Timestamps are epoch milliseconds.
"""

from __future__ import annotations

import enum
import hashlib
import hmac
import json
import os
import re
import sqlite3
import threading
import time
import zlib
from contextlib import contextmanager
from dataclasses import dataclass, replace
from typing import Any, Iterable

from atmocat.capabilities import BBox, LayerDraft, ServiceDraft
from atmocat.crawl.urls import normalize_url, strip_ows_params
from atmocat.errors import (
    DisplayOrderConflict, DuplicateUser, InvalidEmail, LayerInUse, LinkExists, LinkNotFound,
    MalformedDocument, StorageFailure, UnknownLayer, UnknownService, UnknownUser,
    UnknownWorkspace,
)
from atmocat.geo import UNKNOWN, GeoLocation

SCHEMA = """
CREATE TABLE IF NOT EXISTS data_source_catalogue (
    service_id      INTEGER PRIMARY KEY AUTOINCREMENT,
    url             TEXT NOT NULL UNIQUE,
    service_type    TEXT NOT NULL,
    version         TEXT NOT NULL,
    title           TEXT NOT NULL DEFAULT '',
    abstract        TEXT NOT NULL DEFAULT '',
    keywords        TEXT NOT NULL DEFAULT '[]',
    provider_name   TEXT NOT NULL DEFAULT '',
    contact         TEXT,
    latitude        REAL NOT NULL DEFAULT 0,
    longitude       REAL NOT NULL DEFAULT 0,
    country         TEXT NOT NULL DEFAULT 'unknown',
    score           REAL NOT NULL DEFAULT 0,
    discovered_at   REAL NOT NULL,
    last_probed_at  REAL
);
CREATE TABLE IF NOT EXISTS user_profile (
    user_id         TEXT PRIMARY KEY,
    full_name       TEXT NOT NULL DEFAULT '',
    institution     TEXT NOT NULL DEFAULT '',
    password_hash   TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS layer (
    layer_id        INTEGER PRIMARY KEY AUTOINCREMENT,
    service_id      INTEGER NOT NULL REFERENCES data_source_catalogue(service_id),
    name            TEXT NOT NULL CHECK (name <> ''),
    url             TEXT NOT NULL,
    supported_srs   TEXT NOT NULL DEFAULT '[]',
    bbox            TEXT,
    symbol          TEXT,
    quality_score   REAL NOT NULL DEFAULT 0,
    owner_user_id   TEXT REFERENCES user_profile(user_id),
    UNIQUE (service_id, name)
);
CREATE TABLE IF NOT EXISTS layer_metadata (
    layer_id        INTEGER PRIMARY KEY REFERENCES layer(layer_id) ON DELETE CASCADE,
    title           TEXT NOT NULL DEFAULT '',
    abstract        TEXT NOT NULL DEFAULT '',
    keywords        TEXT NOT NULL DEFAULT '[]',
    formats         TEXT NOT NULL DEFAULT '[]',
    time_start      TEXT,
    time_end        TEXT
);
CREATE TABLE IF NOT EXISTS workspace (
    workspace_id    INTEGER PRIMARY KEY AUTOINCREMENT,
    user_id         TEXT NOT NULL REFERENCES user_profile(user_id),
    workspacedata   BLOB NOT NULL
);
CREATE TABLE IF NOT EXISTS workspace_layer (
    workspace_id    INTEGER NOT NULL REFERENCES workspace(workspace_id) ON DELETE CASCADE,
    layer_id        INTEGER NOT NULL REFERENCES layer(layer_id),
    display_order   INTEGER NOT NULL,
    PRIMARY KEY (workspace_id, layer_id),
    UNIQUE (workspace_id, display_order)
);
CREATE TABLE IF NOT EXISTS data_analysis (
    profile_id      TEXT PRIMARY KEY,
    service_name    TEXT NOT NULL,
    service_url     TEXT NOT NULL,
    inputs          TEXT NOT NULL,
    outputs         TEXT NOT NULL,
    rule_description TEXT NOT NULL DEFAULT '',
    constraints     TEXT NOT NULL DEFAULT '[]',
    bound_layer_id  INTEGER REFERENCES layer(layer_id)
);
CREATE TABLE IF NOT EXISTS probe_sample (
    sample_id       INTEGER PRIMARY KEY AUTOINCREMENT,
    service_id      INTEGER NOT NULL REFERENCES data_source_catalogue(service_id),
    timestamp       REAL NOT NULL,
    latency_ms      REAL,
    failed          INTEGER NOT NULL DEFAULT 0,
    http_status     INTEGER
);
CREATE INDEX IF NOT EXISTS probe_sample_service ON probe_sample(service_id, timestamp);
"""


# --- records ---------------------------------------------------------------

@dataclass(frozen=True)
class ServiceRecord:
    service_id: int
    url: str
    service_type: str
    version: str
    title: str
    abstract: str
    keywords: tuple[str, ...]
    provider_name: str
    contact: str | None
    latitude: float
    longitude: float
    country: str
    score: float
    discovered_at: float
    last_probed_at: float | None


@dataclass(frozen=True)
class LayerRecord:
    layer_id: int
    service_id: int
    name: str
    url: str
    supported_srs: tuple[str, ...]
    bounding_box: BBox | None
    symbol: dict | None
    quality_score: float
    owner_user_id: str | None


@dataclass(frozen=True)
class LayerMetadata:
    layer_id: int
    title: str
    abstract: str
    keywords: tuple[str, ...]
    formats: tuple[str, ...]
    time_extent: tuple[str, str] | None


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    full_name: str
    institution: str
    password_hash: str


class DataKind(str, enum.Enum):
    RASTER_COVERAGE = "RasterCoverage"
    VECTOR_FEATURES = "VectorFeatures"
    TABLE = "Table"
    SCALAR = "Scalar"


@dataclass(frozen=True)
class AnalysisProfile:
    profile_id: str
    service_name: str
    service_url: str
    inputs: tuple[tuple[str, DataKind], ...]
    outputs: tuple[tuple[str, DataKind], ...]
    rule_description: str = ""
    constraints: tuple[str, ...] = ()
    bound_layer_id: int | None = None

    def __post_init__(self):
        if not self.inputs or not self.outputs:
            raise ValueError(f"profile {self.profile_id!r} needs at least one input and one output")
        object.__setattr__(self, "inputs", tuple((n, DataKind(k)) for n, k in self.inputs))
        object.__setattr__(self, "outputs", tuple((n, DataKind(k)) for n, k in self.outputs))
        object.__setattr__(self, "constraints", tuple(self.constraints))


@dataclass(frozen=True)
class ProbeSample:
    service_id: int
    timestamp: float
    latency_ms: float | None = None
    failed: bool = False
    http_status: int | None = None

    def __post_init__(self):
        if (self.latency_ms is None) == (not self.failed):
            raise ValueError("a probe sample carries either a latency or a failure marker")


# --- workspaces ------------------------------------------------------------

@dataclass(frozen=True)
class WorkspaceLayer:
    layer_id: int
    display_order: int
    style_override: dict | None = None


@dataclass(frozen=True)
class Workspace:
    workspace_id: int
    name: str
    default_srs: str
    layers: tuple[WorkspaceLayer, ...] = ()
    user_id: str | None = None

    def __post_init__(self):
        layers = tuple(sorted(self.layers, key=lambda e: e.display_order))
        orders = [e.display_order for e in layers]
        if len(set(orders)) != len(orders):
            raise DisplayOrderConflict("display orders must be unique within a workspace")
        object.__setattr__(self, "layers", layers)

    def layer_ids(self) -> list[int]:
        return [e.layer_id for e in self.layers]


_WS_KEYS = {"workspaceId", "name", "defaultSrs", "layers"}
_WS_LAYER_KEYS = {"layerId", "displayOrder"}


def workspace_to_dict(ws: Workspace) -> dict:
    layers = []
    for e in ws.layers:
        item: dict[str, Any] = {"layerId": e.layer_id, "displayOrder": e.display_order}
        if e.style_override is not None:
            item["styleOverride"] = e.style_override
        layers.append(item)
    return {"workspaceId": ws.workspace_id, "name": ws.name,
            "defaultSrs": ws.default_srs, "layers": layers}


def dump_workspace(ws: Workspace) -> str:
    """Canonical JSON text of a workspace (layers in ascending display order)."""
    return json.dumps(workspace_to_dict(ws), sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def load_workspace(document: str | bytes | dict, user_id: str | None = None) -> Workspace:
    """Parse a workspace document; unknown or missing keys are rejected."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except (ValueError, UnicodeDecodeError) as exc:
            raise MalformedDocument(f"workspace is not valid JSON: {exc}") from None
    if not isinstance(document, dict) or set(document) != _WS_KEYS:
        raise MalformedDocument(f"workspace document must have exactly the keys {sorted(_WS_KEYS)}")
    ws_id, name, srs, layers = (document[k] for k in ("workspaceId", "name", "defaultSrs", "layers"))
    if not _is_int(ws_id) or not isinstance(name, str) or not isinstance(srs, str):
        raise MalformedDocument("workspaceId must be an integer, name and defaultSrs strings")
    if not isinstance(layers, list):
        raise MalformedDocument("layers must be an array")
    entries = []
    for item in layers:
        if not isinstance(item, dict):
            raise MalformedDocument("layer entries must be objects")
        keys = set(item)
        if not _WS_LAYER_KEYS <= keys or keys - _WS_LAYER_KEYS - {"styleOverride"}:
            raise MalformedDocument(f"bad layer entry keys: {sorted(keys)}")
        if not _is_int(item["layerId"]) or not _is_int(item["displayOrder"]):
            raise MalformedDocument("layerId and displayOrder must be integers")
        style = item.get("styleOverride")
        if "styleOverride" in item and not isinstance(style, dict):
            raise MalformedDocument("styleOverride must be an object")
        entries.append(WorkspaceLayer(item["layerId"], item["displayOrder"], style))
    if len({e.layer_id for e in entries}) != len(entries):
        raise MalformedDocument("a layer may appear only once in a workspace")
    try:
        return Workspace(ws_id, name, srs, tuple(entries), user_id)
    except DisplayOrderConflict as exc:
        raise MalformedDocument(str(exc)) from None


_RAW, _DEFLATE = 0, 1
COMPRESS_OVER_BYTES = 512


def encode_workspacedata(text: str) -> bytes:
    """Header byte 0 = raw UTF-8 JSON, 1 = DEFLATE-compressed JSON."""
    raw = text.encode("utf-8")
    if len(raw) > COMPRESS_OVER_BYTES:
        return bytes([_DEFLATE]) + zlib.compress(raw, 9)
    return bytes([_RAW]) + raw


def decode_workspacedata(blob: bytes) -> str:
    if not blob:
        raise MalformedDocument("empty workspacedata")
    flag, payload = blob[0], bytes(blob[1:])
    if flag == _DEFLATE:
        payload = zlib.decompress(payload)
    elif flag != _RAW:
        raise MalformedDocument(f"unknown workspacedata codec {flag}")
    return payload.decode("utf-8")


# --- passwords -------------------------------------------------------------

_EMAIL = re.compile(r"^[A-Za-z0-9.!#$%&'*+/=?^_`{|}~-]+@[A-Za-z0-9](?:[A-Za-z0-9-]*[A-Za-z0-9])?"
                    r"(?:\.[A-Za-z0-9](?:[A-Za-z0-9-]*[A-Za-z0-9])?)+$")
_SCRYPT = dict(n=2 ** 14, r=8, p=1)


def hash_password(password: str, salt: bytes | None = None) -> str:
    salt = salt or os.urandom(16)
    digest = hashlib.scrypt(password.encode("utf-8"), salt=salt, dklen=32, **_SCRYPT)
    return f"scrypt${_SCRYPT['n']}${_SCRYPT['r']}${_SCRYPT['p']}${salt.hex()}${digest.hex()}"


def verify_password(password: str, stored: str) -> bool:
    try:
        _, n, r, p, salt, digest = stored.split("$")
        candidate = hashlib.scrypt(password.encode("utf-8"), salt=bytes.fromhex(salt),
                                   n=int(n), r=int(r), p=int(p), dklen=len(digest) // 2)
    except (ValueError, TypeError):
        return False
    return hmac.compare_digest(candidate.hex(), digest)


# --- the store -------------------------------------------------------------

def _dumps(value) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _bbox_json(bbox) -> str | None:
    return None if bbox is None else _dumps(list(bbox))


class Catalogue:
    """Transactional catalogue store.

    One connection guarded by a re-entrant lock: writers are serialised and
    each multi-row change runs inside a single transaction.
    """

    def __init__(self, path: str = ":memory:"):
        self.path = str(path)
        try:
            self._conn = sqlite3.connect(self.path, isolation_level=None, check_same_thread=False)
            self._conn.row_factory = sqlite3.Row
            self._conn.execute("PRAGMA foreign_keys = ON")
            if self.path != ":memory:":
                self._conn.execute("PRAGMA journal_mode = WAL")
            self._conn.executescript(SCHEMA)
        except sqlite3.Error as exc:
            raise StorageFailure(f"cannot open catalogue at {self.path}: {exc}") from exc
        self._lock = threading.RLock()

    def close(self):
        with self._lock:
            self._conn.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @contextmanager
    def _tx(self):
        with self._lock:
            try:
                self._conn.execute("BEGIN IMMEDIATE")
            except sqlite3.Error as exc:
                raise StorageFailure(str(exc)) from exc
            try:
                yield self._conn
            except sqlite3.Error as exc:
                self._conn.execute("ROLLBACK")
                raise StorageFailure(str(exc)) from exc
            except BaseException:
                self._conn.execute("ROLLBACK")
                raise
            else:
                self._conn.execute("COMMIT")

    def _query(self, sql, params=()):
        with self._lock:
            try:
                return self._conn.execute(sql, params).fetchall()
            except sqlite3.Error as exc:
                raise StorageFailure(str(exc)) from exc

    # services and layers

    def upsert_service(self, draft: ServiceDraft, geo: GeoLocation | tuple | None,
                       layers: Iterable[LayerDraft], now: float | None = None) -> int:
        """Insert or update a service keyed by its capabilities URL, with its layers.

        Re-ingesting identical input leaves the store unchanged. Layers are
        keyed by (service, name); layers missing from a new ingest are kept.
        """
        if geo is None:
            geo = GeoLocation()
        elif not isinstance(geo, GeoLocation):
            geo = GeoLocation(*geo)
        if geo.country != UNKNOWN and not (-90 <= geo.latitude <= 90 and -180 <= geo.longitude <= 180):
            raise ValueError(f"coordinates out of range: {geo}")
        url = normalize_url(draft.capabilities_url)
        base_url = strip_ows_params(url)
        now = time.time() * 1000.0 if now is None else now
        svc_values = (draft.service_type.value, draft.version, draft.title, draft.abstract,
                      _dumps(list(draft.keywords)), draft.provider_name, draft.contact,
                      geo.latitude, geo.longitude, geo.country)
        with self._tx() as c:
            row = c.execute("SELECT service_id FROM data_source_catalogue WHERE url = ?",
                            (url,)).fetchone()
            if row is None:
                cur = c.execute(
                    "INSERT INTO data_source_catalogue (url, service_type, version, title, abstract,"
                    " keywords, provider_name, contact, latitude, longitude, country, discovered_at)"
                    " VALUES (?,?,?,?,?,?,?,?,?,?,?,?)", (url, *svc_values, now))
                service_id = cur.lastrowid
            else:
                service_id = row["service_id"]
                c.execute(
                    "UPDATE data_source_catalogue SET service_type=?, version=?, title=?, abstract=?,"
                    " keywords=?, provider_name=?, contact=?, latitude=?, longitude=?, country=?"
                    " WHERE service_id=?", (*svc_values, service_id))
            for layer in layers:
                self._upsert_layer(c, service_id, base_url, layer)
        return service_id

    @staticmethod
    def _upsert_layer(c, service_id: int, base_url: str, layer: LayerDraft) -> int:
        if not layer.name:
            raise ValueError("layers need a non-empty name")
        row = c.execute("SELECT layer_id FROM layer WHERE service_id=? AND name=?",
                        (service_id, layer.name)).fetchone()
        layer_values = (base_url, _dumps(list(layer.supported_srs)), _bbox_json(layer.bounding_box))
        time_start, time_end = layer.time_extent or (None, None)
        meta_values = (layer.title, layer.abstract, _dumps(list(layer.keywords)),
                       _dumps(list(layer.formats)), time_start, time_end)
        if row is None:
            cur = c.execute("INSERT INTO layer (service_id, name, url, supported_srs, bbox)"
                            " VALUES (?,?,?,?,?)", (service_id, layer.name, *layer_values))
            layer_id = cur.lastrowid
            c.execute("INSERT INTO layer_metadata (layer_id, title, abstract, keywords, formats,"
                      " time_start, time_end) VALUES (?,?,?,?,?,?,?)", (layer_id, *meta_values))
        else:
            layer_id = row["layer_id"]
            c.execute("UPDATE layer SET url=?, supported_srs=?, bbox=? WHERE layer_id=?",
                      (*layer_values, layer_id))
            c.execute("UPDATE layer_metadata SET title=?, abstract=?, keywords=?, formats=?,"
                      " time_start=?, time_end=? WHERE layer_id=?", (*meta_values, layer_id))
        return layer_id

    @staticmethod
    def _service(row) -> ServiceRecord:
        return ServiceRecord(
            row["service_id"], row["url"], row["service_type"], row["version"], row["title"],
            row["abstract"], tuple(json.loads(row["keywords"])), row["provider_name"],
            row["contact"], row["latitude"], row["longitude"], row["country"], row["score"],
            row["discovered_at"], row["last_probed_at"])

    @staticmethod
    def _layer(row) -> LayerRecord:
        bbox = json.loads(row["bbox"]) if row["bbox"] else None
        return LayerRecord(
            row["layer_id"], row["service_id"], row["name"], row["url"],
            tuple(json.loads(row["supported_srs"])), tuple(bbox) if bbox else None,
            json.loads(row["symbol"]) if row["symbol"] else None, row["quality_score"],
            row["owner_user_id"])

    @staticmethod
    def _metadata(row) -> LayerMetadata:
        extent = (row["time_start"], row["time_end"]) if row["time_start"] is not None else None
        return LayerMetadata(row["layer_id"], row["title"], row["abstract"],
                             tuple(json.loads(row["keywords"])), tuple(json.loads(row["formats"])),
                             extent)

    def get_service(self, service_id: int) -> ServiceRecord:
        rows = self._query("SELECT * FROM data_source_catalogue WHERE service_id=?", (service_id,))
        if not rows:
            raise UnknownService(service_id)
        return self._service(rows[0])

    def find_service(self, url: str) -> ServiceRecord | None:
        rows = self._query("SELECT * FROM data_source_catalogue WHERE url=?", (normalize_url(url),))
        return self._service(rows[0]) if rows else None

    def list_services(self) -> list[ServiceRecord]:
        return [self._service(r) for r in
                self._query("SELECT * FROM data_source_catalogue ORDER BY service_id")]

    def service_count(self) -> int:
        return self._query("SELECT COUNT(*) FROM data_source_catalogue")[0][0]

    def get_layer(self, layer_id: int) -> LayerRecord:
        rows = self._query("SELECT * FROM layer WHERE layer_id=?", (layer_id,))
        if not rows:
            raise UnknownLayer(layer_id)
        return self._layer(rows[0])

    def get_layer_metadata(self, layer_id: int) -> LayerMetadata:
        rows = self._query("SELECT * FROM layer_metadata WHERE layer_id=?", (layer_id,))
        if not rows:
            raise UnknownLayer(layer_id)
        return self._metadata(rows[0])

    def list_layers(self, service_id: int | None = None) -> list[LayerRecord]:
        if service_id is None:
            rows = self._query("SELECT * FROM layer ORDER BY layer_id")
        else:
            rows = self._query("SELECT * FROM layer WHERE service_id=? ORDER BY layer_id",
                               (service_id,))
        return [self._layer(r) for r in rows]

    def layer_count(self) -> int:
        return self._query("SELECT COUNT(*) FROM layer")[0][0]

    def set_layer_symbol(self, layer_id: int, symbol: dict | None) -> None:
        with self._tx() as c:
            cur = c.execute("UPDATE layer SET symbol=? WHERE layer_id=?",
                            (None if symbol is None else _dumps(symbol), layer_id))
            if cur.rowcount == 0:
                raise UnknownLayer(layer_id)

    def set_layer_owner(self, layer_id: int, user_id: str | None) -> None:
        with self._tx() as c:
            if user_id is not None and not c.execute(
                    "SELECT 1 FROM user_profile WHERE user_id=?", (user_id,)).fetchone():
                raise UnknownUser(user_id)
            cur = c.execute("UPDATE layer SET owner_user_id=? WHERE layer_id=?", (user_id, layer_id))
            if cur.rowcount == 0:
                raise UnknownLayer(layer_id)

    def delete_layer(self, layer_id: int) -> None:
        """Remove a layer from the catalogue; refused while any workspace or profile uses it."""
        with self._tx() as c:
            if not c.execute("SELECT 1 FROM layer WHERE layer_id=?", (layer_id,)).fetchone():
                raise UnknownLayer(layer_id)
            if c.execute("SELECT 1 FROM workspace_layer WHERE layer_id=? UNION "
                         "SELECT 1 FROM data_analysis WHERE bound_layer_id=?",
                         (layer_id, layer_id)).fetchone():
                raise LayerInUse(f"layer {layer_id} is still referenced")
            c.execute("DELETE FROM layer_metadata WHERE layer_id=?", (layer_id,))
            c.execute("DELETE FROM layer WHERE layer_id=?", (layer_id,))

    def set_scores(self, service_id: int, score: float, layer_scores: dict[int, float]) -> None:
        with self._tx() as c:
            cur = c.execute("UPDATE data_source_catalogue SET score=? WHERE service_id=?",
                            (score, service_id))
            if cur.rowcount == 0:
                raise UnknownService(service_id)
            for layer_id, q in layer_scores.items():
                c.execute("UPDATE layer SET quality_score=? WHERE layer_id=? AND service_id=?",
                          (q, layer_id, service_id))

    def record_probe(self, sample: ProbeSample) -> None:
        with self._tx() as c:
            if not c.execute("SELECT 1 FROM data_source_catalogue WHERE service_id=?",
                             (sample.service_id,)).fetchone():
                raise UnknownService(sample.service_id)
            c.execute("INSERT INTO probe_sample (service_id, timestamp, latency_ms, failed,"
                      " http_status) VALUES (?,?,?,?,?)",
                      (sample.service_id, sample.timestamp, sample.latency_ms,
                       int(sample.failed), sample.http_status))
            c.execute("UPDATE data_source_catalogue SET last_probed_at=? WHERE service_id=?",
                      (sample.timestamp, sample.service_id))

    def probe_samples(self, service_id: int, limit: int = 10) -> list[ProbeSample]:
        """The most recent ``limit`` samples, oldest first."""
        rows = self._query("SELECT * FROM probe_sample WHERE service_id=?"
                           " ORDER BY timestamp DESC, sample_id DESC LIMIT ?", (service_id, limit))
        return [ProbeSample(r["service_id"], r["timestamp"], r["latency_ms"], bool(r["failed"]),
                            r["http_status"]) for r in reversed(rows)]

    def layer_rows(self) -> list[dict]:
        """Flattened layer + metadata + service rows for searching (one read snapshot)."""
        rows = self._query(
            "SELECT l.*, m.title AS m_title, m.abstract AS m_abstract, m.keywords AS m_keywords,"
            " m.formats, m.time_start, m.time_end, s.url AS service_url, s.service_type, s.version,"
            " s.title AS service_title, s.abstract AS service_abstract, s.keywords AS s_keywords,"
            " s.provider_name, s.country, s.score FROM layer l"
            " JOIN layer_metadata m ON m.layer_id = l.layer_id"
            " JOIN data_source_catalogue s ON s.service_id = l.service_id ORDER BY l.layer_id")
        out = []
        for r in rows:
            bbox = json.loads(r["bbox"]) if r["bbox"] else None
            out.append({
                "layerId": r["layer_id"],
                "serviceId": r["service_id"],
                "name": r["name"],
                "title": r["m_title"],
                "abstract": r["m_abstract"],
                "keywords": json.loads(r["m_keywords"]),
                "formats": json.loads(r["formats"]),
                "srs": json.loads(r["supported_srs"]),
                "bbox": tuple(bbox) if bbox else None,
                "timeStart": r["time_start"],
                "timeEnd": r["time_end"],
                "qualityScore": r["quality_score"],
                "url": r["url"],
                "serviceUrl": r["service_url"],
                "serviceType": r["service_type"],
                "version": r["version"],
                "serviceTitle": r["service_title"],
                "serviceAbstract": r["service_abstract"],
                "serviceKeywords": json.loads(r["s_keywords"]),
                "providerName": r["provider_name"],
                "country": r["country"],
                "score": r["score"],
            })
        return out

    # users

    def register_user(self, email: str, full_name: str, institution: str, password: str) -> str:
        if not isinstance(email, str) or not _EMAIL.match(email):
            raise InvalidEmail(f"not an email address: {email!r}")
        user_id = email.strip().lower()
        hashed = hash_password(password)
        with self._tx() as c:
            if c.execute("SELECT 1 FROM user_profile WHERE user_id=?", (user_id,)).fetchone():
                raise DuplicateUser(user_id)
            c.execute("INSERT INTO user_profile VALUES (?,?,?,?)",
                      (user_id, full_name, institution, hashed))
        return user_id

    def get_user(self, user_id: str) -> UserProfile:
        rows = self._query("SELECT * FROM user_profile WHERE user_id=?", (user_id.lower(),))
        if not rows:
            raise UnknownUser(user_id)
        r = rows[0]
        return UserProfile(r["user_id"], r["full_name"], r["institution"], r["password_hash"])

    def authenticate(self, email: str, password: str) -> bool:
        rows = self._query("SELECT password_hash FROM user_profile WHERE user_id=?",
                           (email.strip().lower(),))
        return bool(rows) and verify_password(password, rows[0]["password_hash"])

    # workspaces

    def _read_workspace(self, c, workspace_id: int) -> Workspace:
        row = c.execute("SELECT * FROM workspace WHERE workspace_id=?", (workspace_id,)).fetchone()
        if row is None:
            raise UnknownWorkspace(workspace_id)
        return load_workspace(decode_workspacedata(row["workspacedata"]), row["user_id"])

    def _write_workspace(self, c, ws: Workspace) -> None:
        c.execute("UPDATE workspace SET workspacedata=? WHERE workspace_id=?",
                  (encode_workspacedata(dump_workspace(ws)), ws.workspace_id))
        c.execute("DELETE FROM workspace_layer WHERE workspace_id=?", (ws.workspace_id,))
        c.executemany("INSERT INTO workspace_layer VALUES (?,?,?)",
                      [(ws.workspace_id, e.layer_id, e.display_order) for e in ws.layers])

    def create_workspace(self, user_id: str, name: str, default_srs: str = "EPSG:4326") -> int:
        with self._tx() as c:
            if not c.execute("SELECT 1 FROM user_profile WHERE user_id=?",
                             (user_id.lower(),)).fetchone():
                raise UnknownUser(user_id)
            cur = c.execute("INSERT INTO workspace (user_id, workspacedata) VALUES (?, ?)",
                            (user_id.lower(), b"\x00{}"))
            ws = Workspace(cur.lastrowid, name, default_srs, (), user_id.lower())
            self._write_workspace(c, ws)
        return ws.workspace_id

    def get_workspace(self, workspace_id: int) -> Workspace:
        with self._lock:
            return self._read_workspace(self._conn, workspace_id)

    def list_workspaces(self, user_id: str) -> list[Workspace]:
        ids = self._query("SELECT workspace_id FROM workspace WHERE user_id=? ORDER BY workspace_id",
                          (user_id.lower(),))
        return [self.get_workspace(r[0]) for r in ids]

    def add_layer_to_workspace(self, workspace_id: int, layer_id: int, display_order: int,
                               style_override: dict | None = None) -> Workspace:
        with self._tx() as c:
            ws = self._read_workspace(c, workspace_id)
            if not c.execute("SELECT 1 FROM layer WHERE layer_id=?", (layer_id,)).fetchone():
                raise UnknownLayer(layer_id)
            if any(e.display_order == display_order for e in ws.layers):
                raise DisplayOrderConflict(
                    f"display order {display_order} already used in workspace {workspace_id}")
            if layer_id in ws.layer_ids():
                raise LinkExists(f"layer {layer_id} is already in workspace {workspace_id}")
            ws = replace(ws, layers=ws.layers + (WorkspaceLayer(layer_id, display_order, style_override),))
            self._write_workspace(c, ws)
        return ws

    def remove_layer_from_workspace(self, workspace_id: int, layer_id: int) -> Workspace:
        """Drop only the workspace-to-layer link; the layer rows stay."""
        with self._tx() as c:
            ws = self._read_workspace(c, workspace_id)
            if layer_id not in ws.layer_ids():
                raise LinkNotFound(f"layer {layer_id} is not in workspace {workspace_id}")
            ws = replace(ws, layers=tuple(e for e in ws.layers if e.layer_id != layer_id))
            self._write_workspace(c, ws)
        return ws

    def serialize_workspace(self, workspace_id: int) -> str:
        return dump_workspace(self.get_workspace(workspace_id))

    def workspaces_linking(self, layer_id: int) -> list[int]:
        return [r[0] for r in self._query(
            "SELECT workspace_id FROM workspace_layer WHERE layer_id=? ORDER BY workspace_id",
            (layer_id,))]

    # analysis profiles

    def register_profile(self, profile: AnalysisProfile) -> str:
        def kinds(pairs):
            return _dumps([[n, k.value] for n, k in pairs])

        with self._tx() as c:
            if profile.bound_layer_id is not None and not c.execute(
                    "SELECT 1 FROM layer WHERE layer_id=?", (profile.bound_layer_id,)).fetchone():
                raise UnknownLayer(profile.bound_layer_id)
            c.execute("INSERT OR REPLACE INTO data_analysis VALUES (?,?,?,?,?,?,?,?)",
                      (profile.profile_id, profile.service_name, profile.service_url,
                       kinds(profile.inputs), kinds(profile.outputs), profile.rule_description,
                       _dumps(list(profile.constraints)), profile.bound_layer_id))
        return profile.profile_id

    def list_profiles(self) -> list[AnalysisProfile]:
        rows = self._query("SELECT * FROM data_analysis ORDER BY profile_id")
        return [AnalysisProfile(
            r["profile_id"], r["service_name"], r["service_url"],
            tuple(tuple(x) for x in json.loads(r["inputs"])),
            tuple(tuple(x) for x in json.loads(r["outputs"])),
            r["rule_description"], tuple(json.loads(r["constraints"])), r["bound_layer_id"],
        ) for r in rows]

    # diagnostics

    def state_dump(self) -> dict[str, list[tuple]]:
        """Every table's rows, for whole-state comparisons in tests."""
        tables = ["data_source_catalogue", "layer", "layer_metadata", "user_profile", "workspace",
                  "workspace_layer", "data_analysis", "probe_sample"]
        return {t: [tuple(r) for r in self._query(f"SELECT * FROM {t} ORDER BY 1, 2")] for t in tables}
