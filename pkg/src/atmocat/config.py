"""YAML configuration shared by the CLI and the HTTP service.

Environment variables override the file: ``ATMOCAT_STORE``, ``ATMOCAT_API_TOKEN``,
``ATMOCAT_LISTEN`` and ``ATMOCAT_VOCABULARY``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import yaml

from atmocat.crawl.engine import CrawlSettings
from atmocat.crawl.seeds import SeedFileProvider, StubSeedProvider
from atmocat.crawl.urls import ProbePatterns
from atmocat.errors import ConfigError
from atmocat.geo import GeoResolver
from atmocat.scoring import ScoringConfig
from atmocat.semantic import Vocabulary, default_vocabulary, load_vocabulary_file

ENV_OVERRIDES = {
    "ATMOCAT_STORE": "store",
    "ATMOCAT_API_TOKEN": "api_token",
    "ATMOCAT_LISTEN": "listen",
    "ATMOCAT_VOCABULARY": "vocabulary",
}


@dataclass
class ServiceInfo:
    title: str = "Atmospheric data catalogue"
    abstract: str = "Catalogue of OGC web services holding atmospheric data."
    provider: str = ""


@dataclass
class Config:
    store: str = "atmocat.db"
    listen: str = "127.0.0.1:8080"
    api_token: str | None = None
    vocabulary: str | None = None
    threshold: int = 1
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    per_host_delay_ms: float = 1000.0
    max_depth: int = 3
    max_pages: int = 100
    timeout_s: float = 10.0
    respect_robots: bool = True
    workers: int = 1
    probe_patterns: str | None = None
    seeds: str | None = None
    geo: dict = field(default_factory=dict)
    web: str | None = None
    service: ServiceInfo = field(default_factory=ServiceInfo)
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def host_port(self) -> tuple[str, int]:
        host, _, port = self.listen.rpartition(":")
        try:
            return host or "127.0.0.1", int(port)
        except ValueError:
            raise ConfigError(f"listen must be host:port, got {self.listen!r}") from None

    def path(self, value: str | None) -> Path | None:
        if value is None:
            return None
        p = Path(value).expanduser()
        return p if p.is_absolute() else self.base_dir / p

    def load_vocabulary(self) -> Vocabulary:
        return load_vocabulary_file(self.path(self.vocabulary)) if self.vocabulary \
            else default_vocabulary()

    def crawl_settings(self) -> CrawlSettings:
        patterns = ProbePatterns.from_file(self.path(self.probe_patterns)) \
            if self.probe_patterns else None
        return CrawlSettings(timeout_s=self.timeout_s, respect_robots=self.respect_robots,
                             workers=self.workers, patterns=patterns)

    def geo_resolver(self) -> GeoResolver:
        return GeoResolver.from_mapping(self.geo)

    def seed_provider(self):
        """Seed provider for keyword crawls: a stub results file (YAML) or a plain seed list."""
        if not self.seeds:
            return StubSeedProvider()
        p = self.path(self.seeds)
        if p.suffix in (".yaml", ".yml"):
            return StubSeedProvider.from_file(p)
        return SeedFileProvider(p)


_SCALARS = {
    "store": str, "listen": str, "api_token": str, "vocabulary": str, "threshold": int,
    "per_host_delay_ms": float, "max_depth": int, "max_pages": int, "timeout_s": float,
    "respect_robots": bool, "workers": int, "probe_patterns": str, "seeds": str, "web": str,
}


def _coerce(key, value, kind):
    if value is None:
        return None
    if kind is bool and not isinstance(value, bool):
        raise ConfigError(f"{key} must be true or false")
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot read {value!r} as {kind.__name__}") from None


def config_from_mapping(data: Mapping, base_dir: Path | None = None) -> Config:
    cfg = Config(base_dir=base_dir or Path.cwd())
    unknown = set(data) - set(_SCALARS) - {"scoring", "geo", "service"}
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key, kind in _SCALARS.items():
        if key in data:
            setattr(cfg, key, _coerce(key, data[key], kind))
    scoring = data.get("scoring") or {}
    try:
        cfg.scoring = ScoringConfig(
            weights=tuple(float(w) for w in scoring.get("weights", cfg.scoring.weights)),
            half_life_ms=float(scoring.get("half_life_ms", cfg.scoring.half_life_ms)),
            window=int(scoring.get("window", cfg.scoring.window)),
            probe_interval_s=float(scoring.get("probe_interval_s", cfg.scoring.probe_interval_s)),
        )
    except (TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"bad scoring section: {exc}") from None
    if len(cfg.scoring.weights) != 2:
        raise ConfigError("scoring.weights needs exactly two numbers")
    cfg.geo = dict(data.get("geo") or {})
    service = data.get("service") or {}
    cfg.service = ServiceInfo(**{k: str(v) for k, v in service.items()
                                 if k in ("title", "abstract", "provider")})
    return cfg


def load_config(path: str | Path | None = None,
                env: Mapping[str, str] | None = None) -> Config:
    """Read ``path`` (if given) and apply environment overrides."""
    env = os.environ if env is None else env
    data: dict = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            with open(path, encoding="utf-8") as fh:
                data = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a mapping")
        base = path.parent.resolve()
    for var, key in ENV_OVERRIDES.items():
        if env.get(var):
            value = env[var]
            # paths from the environment are relative to the working directory
            if key in ("store", "vocabulary") and value != ":memory:":
                value = os.path.abspath(value)
            data[key] = value
    return config_from_mapping(data, base)
