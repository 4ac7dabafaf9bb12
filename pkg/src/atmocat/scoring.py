"""Quality scores from metadata completeness and server response time."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Sequence

from atmocat.capabilities import LayerDraft, ServiceDraft
from atmocat.crawl.transport import DEFAULT_TIMEOUT_S, Clock, Transport
from atmocat.crawl.urls import with_params
from atmocat.errors import InvalidWeights, NoSamples, TransportError
from atmocat.store import Catalogue, LayerMetadata, LayerRecord, ProbeSample, ServiceRecord

DEFAULT_WEIGHTS = (0.5, 0.5)
DEFAULT_HALF_LIFE_MS = 2000.0
SAMPLE_WINDOW = 10
FAILURE_HALF_LIVES = 4

CHECKLIST = ("title", "abstract", "keywords", "bounding_box", "supported_srs", "contact")


@dataclass(frozen=True)
class MetadataView:
    """The six checklist fields, however the record that carries them is shaped."""

    title: str = ""
    abstract: str = ""
    keywords: Sequence[str] = ()
    bounding_box: tuple | None = None
    supported_srs: Sequence[str] = ()
    contact: str | None = None

    @classmethod
    def of_service(cls, draft: ServiceDraft | ServiceRecord, layers=()) -> "MetadataView":
        """A service view; spatial fields come from its layers."""
        bbox = next((l.bounding_box for l in layers if l.bounding_box), None)
        srs = [s for l in layers for s in l.supported_srs]
        contact = draft.contact or draft.provider_name
        return cls(draft.title, draft.abstract, tuple(draft.keywords), bbox, tuple(srs), contact)

    @classmethod
    def of_layer(cls, layer: LayerDraft | LayerRecord, meta: LayerMetadata | None = None,
                 provider: str | None = None) -> "MetadataView":
        src = meta if meta is not None else layer
        return cls(src.title, src.abstract, tuple(src.keywords), layer.bounding_box,
                   tuple(layer.supported_srs), provider)


def _present(value) -> bool:
    if value is None:
        return False
    if isinstance(value, str):
        return bool(value.strip())
    try:
        return len(value) > 0
    except TypeError:
        return True


def completeness(meta: MetadataView) -> float:
    """Fraction of the six checklist fields that are non-empty."""
    return sum(_present(getattr(meta, f)) for f in CHECKLIST) / len(CHECKLIST)


def latency_score(samples: Sequence[ProbeSample], half_life_ms: float = DEFAULT_HALF_LIFE_MS,
                  window: int = SAMPLE_WINDOW) -> float:
    """``2 ** (-median / half_life)`` over the latest ``window`` samples.

    Failed probes count as four half-lives of latency.
    """
    if half_life_ms <= 0:
        raise ValueError("half_life_ms must be positive")
    if not samples:
        raise NoSamples("latency score needs at least one probe sample")
    recent = sorted(samples, key=lambda s: s.timestamp)[-window:]
    latencies = [FAILURE_HALF_LIVES * half_life_ms if s.failed else max(0.0, s.latency_ms)
                 for s in recent]
    return 2.0 ** (-statistics.median(latencies) / half_life_ms)


@dataclass(frozen=True)
class ScoreBreakdown:
    completeness: float
    latency_score: float
    combined: float
    weights: tuple[float, float]


def combine_score(completeness_value: float, latency_value: float,
                  weights: tuple[float, float] = DEFAULT_WEIGHTS) -> ScoreBreakdown:
    w_c, w_l = weights
    if w_c < 0 or w_l < 0 or not math.isclose(w_c + w_l, 1.0, abs_tol=1e-9):
        raise InvalidWeights(f"weights must be non-negative and sum to 1, got {weights}")
    for v in (completeness_value, latency_value):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"score components must lie in [0, 1], got {v}")
    combined = w_c * completeness_value + w_l * latency_value
    return ScoreBreakdown(completeness_value, latency_value, min(1.0, combined), (w_c, w_l))


def probe(service_url: str, transport: Transport, clock: Clock, service_id: int = 0,
          timeout: float = DEFAULT_TIMEOUT_S) -> ProbeSample:
    """Time one GetCapabilities request. Network failures become failure samples."""
    url = with_params(service_url, request="GetCapabilities")
    started = clock.now()
    try:
        resp = transport.request(url, timeout)
    except TransportError:
        return ProbeSample(service_id, clock.now(), None, True, None)
    finished = clock.now()
    return ProbeSample(service_id, finished, finished - started, False, resp.status)


@dataclass
class ScoringConfig:
    weights: tuple[float, float] = DEFAULT_WEIGHTS
    half_life_ms: float = DEFAULT_HALF_LIFE_MS
    window: int = SAMPLE_WINDOW
    probe_interval_s: float = 3600.0


def rescore_service(store: Catalogue, service_id: int,
                    config: ScoringConfig | None = None) -> ScoreBreakdown:
    """Recompute and persist the service score and the quality score of each of its layers.

    Without any probe history the latency component is 0.
    """
    config = config or ScoringConfig()
    service = store.get_service(service_id)
    layers = store.list_layers(service_id)
    samples = store.probe_samples(service_id, config.window)
    lat = latency_score(samples, config.half_life_ms, config.window) if samples else 0.0
    svc = combine_score(completeness(MetadataView.of_service(service, layers)), lat, config.weights)
    layer_scores = {}
    for layer in layers:
        meta = store.get_layer_metadata(layer.layer_id)
        view = MetadataView.of_layer(layer, meta, service.contact or service.provider_name)
        layer_scores[layer.layer_id] = combine_score(completeness(view), lat, config.weights).combined
    store.set_scores(service_id, svc.combined, layer_scores)
    return svc


def probe_and_rescore(store: Catalogue, transport: Transport, clock: Clock,
                      config: ScoringConfig | None = None) -> dict[int, ScoreBreakdown]:
    """Probe every catalogued service once and refresh all scores."""
    out = {}
    for service in store.list_services():
        sample = probe(service.url, transport, clock, service.service_id)
        store.record_probe(sample)
        out[service.service_id] = rescore_service(store, service.service_id, config)
    return out
