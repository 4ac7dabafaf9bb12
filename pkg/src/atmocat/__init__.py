"""Discovery crawler and catalogue for atmospheric OGC web services."""

__version__ = "0.1.0"
