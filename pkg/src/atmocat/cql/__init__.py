"""Catalogue query language and faceted search."""

from atmocat.cql.ast import (
    And, AnyTextLike, BboxIntersects, Comparison, Expr, Like, Not, Or, to_cql,
)
from atmocat.cql.evaluate import evaluate
from atmocat.cql.parser import parse_cql
from atmocat.cql.search import SearchPage, SearchQuery, SearchResult, search, thumbnail_url

__all__ = [
    "And", "AnyTextLike", "BboxIntersects", "Comparison", "Expr", "Like", "Not", "Or",
    "SearchPage", "SearchQuery", "SearchResult", "evaluate", "parse_cql", "search",
    "thumbnail_url", "to_cql",
]
