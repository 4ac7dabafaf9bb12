"""Seed providers turn crawl keywords into starting URLs."""

from __future__ import annotations

from pathlib import Path
from typing import Protocol

import yaml

from atmocat.crawl.urls import normalize_url


def read_seed_file(path: str | Path) -> list[str]:
    """Read a seed file: UTF-8, one absolute URL per line, ``#`` lines are comments."""
    seeds = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                seeds.append(normalize_url(line))
    return seeds


class SeedProvider(Protocol):
    def seeds_for(self, keywords: list[str]) -> list[str]: ...


class SeedFileProvider:
    """Ignores the keywords and always serves the URLs of one seed file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def seeds_for(self, keywords: list[str]) -> list[str]:
        return read_seed_file(self.path)


class StubSeedProvider:
    """Canned search-engine results keyed by the lowercased keyword phrase.

    Unknown phrases fall back to ``default``.
    """

    def __init__(self, results: dict[str, list[str]] | None = None,
                 default: list[str] | None = None):
        self.results = {k.lower().strip(): [normalize_url(u) for u in v]
                        for k, v in (results or {}).items()}
        self.default = [normalize_url(u) for u in (default or [])]

    @classmethod
    def from_file(cls, path: str | Path) -> "StubSeedProvider":
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        return cls(data.get("results", {}), data.get("default", []))

    def seeds_for(self, keywords: list[str]) -> list[str]:
        seeds: list[str] = []
        phrases = [" ".join(keywords)] + list(keywords)
        for phrase in phrases:
            for url in self.results.get(phrase.lower().strip(), []):
                if url not in seeds:
                    seeds.append(url)
        return seeds or list(self.default)
