"""Expression tree for the catalogue query language and its printer."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

Literal = Union[str, int, float]

COMPARISON_OPS = ("=", "<>", "<", ">", "<=", ">=")


@dataclass(frozen=True)
class Comparison:
    prop: str
    op: str
    literal: Literal


@dataclass(frozen=True)
class Like:
    prop: str
    pattern: str


@dataclass(frozen=True)
class AnyTextLike:
    pattern: str


@dataclass(frozen=True)
class And:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Or:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    inner: "Expr"


@dataclass(frozen=True)
class BboxIntersects:
    min_lon: float
    min_lat: float
    max_lon: float
    max_lat: float


Expr = Union[Comparison, Like, AnyTextLike, And, Or, Not, BboxIntersects]


def quote(text: str) -> str:
    return "'" + text.replace("'", "''") + "'"


def _number(value) -> str:
    if isinstance(value, bool):
        raise TypeError("booleans are not CQL literals")
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def _literal(value: Literal) -> str:
    return quote(value) if isinstance(value, str) else _number(value)


def to_cql(expr: Expr) -> str:
    """Print ``expr`` so that parsing the text yields an identical tree."""
    if isinstance(expr, Comparison):
        return f"{expr.prop} {expr.op} {_literal(expr.literal)}"
    if isinstance(expr, Like):
        return f"{expr.prop} LIKE {quote(expr.pattern)}"
    if isinstance(expr, AnyTextLike):
        return f"AnyText LIKE {quote(expr.pattern)}"
    if isinstance(expr, BboxIntersects):
        nums = ", ".join(_number(v) for v in
                         (expr.min_lon, expr.min_lat, expr.max_lon, expr.max_lat))
        return f"BBOX({nums})"
    if isinstance(expr, Not):
        inner = to_cql(expr.inner)
        if isinstance(expr.inner, (And, Or)):
            inner = f"({inner})"
        return f"NOT {inner}"
    if isinstance(expr, (And, Or)):
        word = "AND" if isinstance(expr, And) else "OR"
        parts = []
        for side in (expr.left, expr.right):
            text = to_cql(side)
            # parenthesise every binary child; keeps the printer trivially correct
            parts.append(f"({text})" if isinstance(side, (And, Or)) else text)
        return f"{parts[0]} {word} {parts[1]}"
    raise TypeError(f"not a CQL expression: {expr!r}")
