"""Evaluate CQL expressions against flattened catalogue records.

A record is a mapping of property name to value; values may be strings,
numbers, lists of those, or (for ``bbox``) a 4-tuple. Property lookup is
case-insensitive. A predicate on a missing property is false, and a
predicate on a list-valued property holds if it holds for any element.
"""

from __future__ import annotations

import math
import re
from functools import lru_cache
from typing import Any, Mapping

from atmocat.cql.ast import And, AnyTextLike, BboxIntersects, Comparison, Expr, Like, Not, Or

ANYTEXT_FIELDS = ("title", "abstract", "keywords")


def _lookup(record: Mapping[str, Any], prop: str):
    if prop in record:
        return record[prop], True
    lowered = prop.lower()
    for key, value in record.items():
        if key.lower() == lowered:
            return value, True
    return None, False


def _as_number(value) -> float | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, str):
        try:
            f = float(value.strip())
        except ValueError:
            return None
        return f if math.isfinite(f) else None
    return None


def _as_text(value) -> str:
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def compare(left, op: str, right) -> bool:
    """Numeric comparison when both sides are numbers, else case-insensitive text."""
    a, b = _as_number(left), _as_number(right)
    if a is None or b is None:
        a, b = _as_text(left).casefold(), _as_text(right).casefold()
    if op == "=":
        return a == b
    if op == "<>":
        return a != b
    if op == "<":
        return a < b
    if op == ">":
        return a > b
    if op == "<=":
        return a <= b
    if op == ">=":
        return a >= b
    raise ValueError(f"unknown operator {op!r}")


@lru_cache(maxsize=512)
def like_regex(pattern: str) -> re.Pattern:
    parts = []
    for ch in pattern:
        if ch == "%":
            parts.append(".*")
        elif ch == "_":
            parts.append(".")
        else:
            parts.append(re.escape(ch))
    return re.compile("".join(parts), re.DOTALL | re.IGNORECASE)


def like(value, pattern: str) -> bool:
    return like_regex(pattern).fullmatch(_as_text(value)) is not None


def _scalars(value):
    if value is None:
        return []
    if isinstance(value, (list, tuple, set, frozenset)):
        return [v for v in value if v is not None]
    return [value]


def anytext(record: Mapping[str, Any]) -> str:
    parts = []
    for name in ANYTEXT_FIELDS:
        value, found = _lookup(record, name)
        if found:
            parts.extend(_as_text(v) for v in _scalars(value))
    return " ".join(parts)


def bbox_intersects(a, b) -> bool:
    """Closed-box intersection; shared edges and corners count."""
    return a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3]


def evaluate(expr: Expr, record: Mapping[str, Any]) -> bool:
    if isinstance(expr, And):
        return evaluate(expr.left, record) and evaluate(expr.right, record)
    if isinstance(expr, Or):
        return evaluate(expr.left, record) or evaluate(expr.right, record)
    if isinstance(expr, Not):
        return not evaluate(expr.inner, record)
    if isinstance(expr, Comparison):
        value, found = _lookup(record, expr.prop)
        return found and any(compare(v, expr.op, expr.literal) for v in _scalars(value))
    if isinstance(expr, Like):
        value, found = _lookup(record, expr.prop)
        return found and any(like(v, expr.pattern) for v in _scalars(value))
    if isinstance(expr, AnyTextLike):
        return like(anytext(record), expr.pattern)
    if isinstance(expr, BboxIntersects):
        value, found = _lookup(record, "bbox")
        if not found or value is None or len(value) != 4:
            return False
        return bbox_intersects(tuple(value),
                               (expr.min_lon, expr.min_lat, expr.max_lon, expr.max_lat))
    raise TypeError(f"not a CQL expression: {expr!r}")
