"""Offline host geolocation used to fill the latitude/longitude/country columns."""

from __future__ import annotations

from dataclasses import dataclass, field
from urllib.parse import urlsplit

UNKNOWN = "unknown"

# Representative coordinates per top-level domain (country centroids).
_SUFFIXES: dict[str, tuple[float, float, str]] = {
    "gov": (39.83, -98.58, "us"),
    "mil": (39.83, -98.58, "us"),
    "edu": (39.83, -98.58, "us"),
    "us": (39.83, -98.58, "us"),
    "ca": (56.13, -106.35, "ca"),
    "mx": (23.63, -102.55, "mx"),
    "br": (-14.24, -51.93, "br"),
    "ar": (-38.42, -63.62, "ar"),
    "cl": (-35.68, -71.54, "cl"),
    "uk": (55.38, -3.44, "gb"),
    "ie": (53.41, -8.24, "ie"),
    "fr": (46.23, 2.21, "fr"),
    "de": (51.17, 10.45, "de"),
    "nl": (52.13, 5.29, "nl"),
    "be": (50.50, 4.47, "be"),
    "lu": (49.82, 6.13, "lu"),
    "ch": (46.82, 8.23, "ch"),
    "at": (47.52, 14.55, "at"),
    "it": (41.87, 12.57, "it"),
    "es": (40.46, -3.75, "es"),
    "pt": (39.40, -8.22, "pt"),
    "dk": (56.26, 9.50, "dk"),
    "no": (60.47, 8.47, "no"),
    "se": (60.13, 18.64, "se"),
    "fi": (61.92, 25.75, "fi"),
    "is": (64.96, -19.02, "is"),
    "pl": (51.92, 19.15, "pl"),
    "cz": (49.82, 15.47, "cz"),
    "sk": (48.67, 19.70, "sk"),
    "hu": (47.16, 19.50, "hu"),
    "si": (46.15, 14.99, "si"),
    "hr": (45.10, 15.20, "hr"),
    "gr": (39.07, 21.82, "gr"),
    "ro": (45.94, 24.97, "ro"),
    "bg": (42.73, 25.49, "bg"),
    "ee": (58.60, 25.01, "ee"),
    "lv": (56.88, 24.60, "lv"),
    "lt": (55.17, 23.88, "lt"),
    "ru": (61.52, 105.32, "ru"),
    "tr": (38.96, 35.24, "tr"),
    "il": (31.05, 34.85, "il"),
    "za": (-30.56, 22.94, "za"),
    "in": (20.59, 78.96, "in"),
    "cn": (35.86, 104.20, "cn"),
    "jp": (36.20, 138.25, "jp"),
    "kr": (35.91, 127.77, "kr"),
    "tw": (23.70, 120.96, "tw"),
    "au": (-25.27, 133.78, "au"),
    "nz": (-40.90, 174.89, "nz"),
}


@dataclass(frozen=True)
class GeoLocation:
    latitude: float = 0.0
    longitude: float = 0.0
    country: str = UNKNOWN


@dataclass
class GeoResolver:
    """Resolve a URL's host to a location.

    Exact host overrides take precedence; otherwise the longest matching
    domain suffix in the table wins.
    """

    overrides: dict[str, GeoLocation] = field(default_factory=dict)
    suffixes: dict[str, tuple[float, float, str]] = field(default_factory=lambda: dict(_SUFFIXES))

    def resolve(self, url: str) -> GeoLocation:
        host = (urlsplit(url).hostname or "").lower().rstrip(".")
        if host in self.overrides:
            return self.overrides[host]
        labels = host.split(".")
        for i in range(len(labels)):
            suffix = ".".join(labels[i:])
            if suffix in self.overrides:
                return self.overrides[suffix]
            if suffix in self.suffixes:
                lat, lon, cc = self.suffixes[suffix]
                return GeoLocation(lat, lon, cc)
        return GeoLocation()

    @classmethod
    def from_mapping(cls, data: dict) -> "GeoResolver":
        overrides = {
            host.lower(): GeoLocation(float(v["latitude"]), float(v["longitude"]), v["country"].lower())
            for host, v in (data or {}).items()
        }
        return cls(overrides=overrides)
