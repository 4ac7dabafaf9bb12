"""Fetch, parse, filter and store a single capabilities document."""

from __future__ import annotations

from dataclasses import dataclass

from atmocat.capabilities import LayerDraft, ServiceDraft, parse_capabilities
from atmocat.crawl.classify import DocKind, classify_response
from atmocat.crawl.transport import DEFAULT_TIMEOUT_S, Clock, SystemClock, Transport
from atmocat.crawl.urls import normalize_url
from atmocat.errors import FetchFailed, NotCapabilities, TransportError
from atmocat.geo import GeoResolver
from atmocat.scoring import ScoringConfig, rescore_service
from atmocat.semantic import RelevanceVerdict, Vocabulary, score_relevance
from atmocat.store import Catalogue, ProbeSample


def relevance_texts(service: ServiceDraft, layers: list[LayerDraft]) -> list[str]:
    """Title, abstract and keywords of the service and of every layer."""
    texts = [service.title, service.abstract, *service.keywords]
    for layer in layers:
        texts += [layer.title, layer.abstract, *layer.keywords]
    return texts


@dataclass
class IngestOutcome:
    accepted: bool
    verdict: RelevanceVerdict
    service_id: int | None = None
    layer_count: int = 0
    new_layers: int = 0

    def summary(self) -> dict:
        return {
            "accepted": int(self.accepted),
            "rejected": int(not self.accepted),
            "layerCount": self.layer_count,
            "newLayers": self.new_layers,
            "serviceId": self.service_id,
            "matchedTerms": sorted(self.verdict.matched_terms),
        }


class Harvester:
    def __init__(self, store: Catalogue, vocabulary: Vocabulary, threshold: int = 1,
                 geo: GeoResolver | None = None, scoring: ScoringConfig | None = None):
        self.store = store
        self.vocabulary = vocabulary
        self.threshold = threshold
        self.geo = geo or GeoResolver()
        self.scoring = scoring or ScoringConfig()

    def ingest(self, xml: bytes, url: str, latency_ms: float | None = None,
               now: float | None = None) -> IngestOutcome:
        """Parse a capabilities document and store it if it is on topic.

        Parse errors propagate as CapabilitiesError subclasses.
        """
        draft, layers = parse_capabilities(xml, url)
        verdict = score_relevance(relevance_texts(draft, layers), self.vocabulary, self.threshold)
        if not verdict.relevant:
            return IngestOutcome(False, verdict, layer_count=len(layers))
        before = self.store.layer_count()
        service_id = self.store.upsert_service(draft, self.geo.resolve(draft.capabilities_url),
                                               layers, now=now)
        if latency_ms is not None and now is not None:
            self.store.record_probe(ProbeSample(service_id, now, latency_ms))
        rescore_service(self.store, service_id, self.scoring)
        return IngestOutcome(True, verdict, service_id, len(layers),
                             self.store.layer_count() - before)

    def harvest(self, url: str, transport: Transport, clock: Clock | None = None,
                timeout: float = DEFAULT_TIMEOUT_S) -> IngestOutcome:
        clock = clock or SystemClock()
        url = normalize_url(url)
        started = clock.now()
        try:
            resp = transport.request(url, timeout)
        except TransportError as exc:
            raise FetchFailed(str(exc)) from exc
        finished = clock.now()
        if resp.status >= 400:
            raise FetchFailed(f"HTTP {resp.status} from {url}")
        kind = classify_response(resp.content_type, resp.body)
        if kind is not DocKind.OWS_CAPABILITIES:
            raise NotCapabilities(f"{url} returned {kind.value}, not a capabilities document")
        return self.ingest(resp.body, url, latency_ms=finished - started, now=finished)
