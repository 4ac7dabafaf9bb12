"""Catalogue statistics: services per country, natural-breaks classes, top providers."""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence
from urllib.parse import urlsplit

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from atmocat.errors import InvalidK

TOP_CLASSES = 3
_REL_TOL = 1e-9


@dataclass(frozen=True)
class CountryCount:
    country: str
    count: int


def country_counts(store, where: Callable | None = None) -> list[CountryCount]:
    """Services grouped by country, most first, ties by country code."""
    tally = Counter(s.country or "unknown" for s in store.list_services()
                    if where is None or where(s))
    return [CountryCount(c, n) for c, n in sorted(tally.items(), key=lambda kv: (-kv[1], kv[0]))]


# --- Jenks natural breaks --------------------------------------------------

@dataclass(frozen=True)
class Classification:
    k: int
    breaks: tuple[float, ...]
    break_indices: tuple[int, ...]  # start index (in sorted values) of classes 2..k
    classes: tuple[tuple[float, ...], ...]
    ssd: float
    gvf: float

    def class_of(self, value: float) -> int:
        """1-based class index for ``value``."""
        for i, upper in enumerate(self.breaks, start=1):
            if value <= upper:
                return i
        return self.k


def _ssd(values: Sequence[float]) -> float:
    if not values:
        return 0.0
    mean = sum(values) / len(values)
    return sum((v - mean) ** 2 for v in values)


def _cost_table(xs: list[float]) -> list[list[float]]:
    """cost[a][b - a - 1] = SSD of xs[a:b], accumulated with Welford's update."""
    n = len(xs)
    table = []
    for a in range(n):
        row, mean, m2 = [], 0.0, 0.0
        for count, x in enumerate(xs[a:], start=1):
            delta = x - mean
            mean += delta / count
            m2 += delta * (x - mean)
            row.append(m2)
        table.append(row)
    return table


def jenks_breaks(values: Iterable[float], k: int) -> Classification:
    """Optimal k-class partition of ``values`` by within-class squared deviation.

    Classes are contiguous runs of the sorted values and never split equal
    values. Among equally good partitions the one with lexicographically
    smallest break indices wins.
    """
    xs = sorted(float(v) for v in values)
    if not xs:
        raise InvalidK("no values to classify")
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
        raise InvalidK(f"k must be a positive integer, got {k!r}")
    k = int(k)
    n = len(xs)
    cuts = [b for b in range(1, n) if xs[b - 1] < xs[b]]
    if k > len(cuts) + 1:
        raise InvalidK(f"k={k} exceeds the {len(cuts) + 1} distinct values")
    cost = _cost_table(xs)

    def c(a, b):
        return cost[a][b - a - 1]

    # suffix[m][a]: best cost of splitting xs[a:] into m classes (a is a cut or 0)
    starts = [0] + cuts
    inf = float("inf")
    suffix = [{a: inf for a in starts} for _ in range(k + 1)]
    for a in starts:
        suffix[1][a] = c(a, n)
    for m in range(2, k + 1):
        for a in starts:
            best = inf
            for b in cuts:
                if b > a and suffix[m - 1][b] < inf:
                    best = min(best, c(a, b) + suffix[m - 1][b])
            suffix[m][a] = best

    total = suffix[k][0]
    tol = _REL_TOL * max(1.0, total)
    picked, a = [], 0
    for m in range(k, 1, -1):
        target = suffix[m][a]
        for b in cuts:
            if b > a and c(a, b) + suffix[m - 1][b] <= target + tol:
                picked.append(b)
                a = b
                break
    return _classification(xs, picked)


def _classification(xs: list[float], break_indices: Sequence[int]) -> Classification:
    bounds = [0, *break_indices, len(xs)]
    classes = tuple(tuple(xs[lo:hi]) for lo, hi in zip(bounds, bounds[1:]))
    ssd = sum(_ssd(cls) for cls in classes)
    sdam = _ssd(xs)
    gvf = 1.0 if sdam == 0 else 1.0 - ssd / sdam
    return Classification(
        k=len(classes),
        breaks=tuple(cls[-1] for cls in classes[:-1]),
        break_indices=tuple(break_indices),
        classes=classes,
        ssd=ssd,
        gvf=gvf,
    )


def goodness_of_variance_fit(values: Iterable[float], k: int) -> float:
    return jenks_breaks(values, k).gvf


class JenksNaturalBreaks(TransformerMixin, BaseEstimator):
    """Natural-breaks binning of a single feature.

    ``fit`` learns ``breaks_`` from one column; ``transform`` maps each value to
    its 1-based class index.
    """

    def __init__(self, n_classes: int = 6):
        self.n_classes = n_classes

    def fit(self, X, y=None):
        X = check_array(X, ensure_2d=True, dtype=np.float64)
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature, got {X.shape[1]}")
        result = jenks_breaks(X[:, 0].tolist(), self.n_classes)
        self.breaks_ = np.asarray(result.breaks, dtype=np.float64)
        self.gvf_ = result.gvf
        self.classification_ = result
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self, "breaks_")
        X = check_array(X, ensure_2d=True, dtype=np.float64)
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature, got {X.shape[1]}")
        return (np.searchsorted(self.breaks_, X[:, 0], side="left") + 1).reshape(-1, 1)


# --- country classification ------------------------------------------------

@dataclass(frozen=True)
class CountryClass:
    country: str
    count: int
    class_index: int
    labeled: bool


@dataclass(frozen=True)
class CountryClassification:
    k: int
    breaks: tuple[float, ...]
    fallback: bool
    rows: tuple[CountryClass, ...] = field(default_factory=tuple)

    @property
    def labeled(self) -> set[str]:
        return {r.country for r in self.rows if r.labeled}

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "breaks": list(self.breaks),
            "fallback": self.fallback,
            "countries": [{"country": r.country, "count": r.count,
                           "classIndex": r.class_index, "labeled": r.labeled}
                          for r in self.rows],
        }


def classify_countries(counts: Sequence[CountryCount], k: int = 6) -> CountryClassification:
    """Natural-breaks classes of per-country counts; the top three classes are labeled.

    With fewer distinct counts than ``k`` the class count drops to the number
    of distinct counts and ``fallback`` is set.
    """
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise InvalidK(f"k must be a positive integer, got {k!r}")
    if not counts:
        return CountryClassification(0, (), False, ())
    distinct = len({c.count for c in counts})
    fallback = distinct < k
    k_eff = distinct if fallback else k
    result = jenks_breaks([c.count for c in counts], k_eff)
    rows = []
    for c in counts:
        idx = result.class_of(c.count)
        rows.append(CountryClass(c.country, c.count, idx, idx > k_eff - TOP_CLASSES))
    return CountryClassification(k_eff, result.breaks, fallback, tuple(rows))


# --- providers -------------------------------------------------------------

def provider_of(service) -> str:
    name = (service.provider_name or "").strip()
    return name or (urlsplit(service.url).hostname or "unknown")


def top_providers(store, n: int, country: str | None = None) -> list[tuple[str, int]]:
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ValueError("n must be a positive integer")
    scope = country.casefold() if country else None
    tally = Counter(provider_of(s) for s in store.list_services()
                    if scope is None or (s.country or "").casefold() == scope)
    return sorted(tally.items(), key=lambda kv: (-kv[1], kv[0]))[:n]


# --- exports ---------------------------------------------------------------

COUNTRY_COLUMNS = ("country", "count", "classIndex", "labeled")
PROVIDER_COLUMNS = ("provider", "count")


def countries_csv(result: CountryClassification) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COUNTRY_COLUMNS)
    for r in result.rows:
        writer.writerow([r.country, r.count, r.class_index, str(r.labeled).lower()])
    return buf.getvalue()


def providers_csv(rows: Sequence[tuple[str, int]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PROVIDER_COLUMNS)
    writer.writerows(rows)
    return buf.getvalue()


def providers_dict(rows: Sequence[tuple[str, int]]) -> dict:
    return {"providers": [{"provider": p, "count": n} for p, n in rows]}


def countries_json(result: CountryClassification) -> str:
    return json.dumps(result.to_dict(), indent=2)


def providers_json(rows: Sequence[tuple[str, int]]) -> str:
    return json.dumps(providers_dict(rows), indent=2)
