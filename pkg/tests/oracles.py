"""Reference implementations used only by the tests.

Each oracle is written from the stated rules without reusing package code, so
agreement with the package is evidence rather than tautology.
"""

from __future__ import annotations

import itertools
import math
import re
from fractions import Fraction


# --- CQL -------------------------------------------------------------------

def _wild(text: str, pattern: str) -> bool:
    # classic DP wildcard match, case-insensitive
    t, p = text.lower(), pattern.lower()
    n, m = len(t), len(p)
    row = [False] * (n + 1)
    row[0] = True
    for j in range(1, m + 1):
        new = [False] * (n + 1)
        if p[j - 1] == "%":
            new[0] = row[0]
            for i in range(1, n + 1):
                new[i] = new[i - 1] or row[i]
        else:
            for i in range(1, n + 1):
                new[i] = row[i - 1] and (p[j - 1] == "_" or p[j - 1] == t[i - 1])
        row = new
    return row[n]


def _num(v):
    if isinstance(v, bool):
        return None
    if isinstance(v, (int, float)):
        return float(v) if math.isfinite(v) else None
    try:
        f = float(str(v).strip())
    except ValueError:
        return None
    return f if math.isfinite(f) else None


def _txt(v) -> str:
    if isinstance(v, float) and v == int(v):
        return str(int(v))
    return str(v)


def _cmp(a, op, b) -> bool:
    x, y = _num(a), _num(b)
    if x is None or y is None:
        x, y = _txt(a).lower(), _txt(b).lower()
    return {"=": x == y, "<>": x != y, "<": x < y, ">": x > y, "<=": x <= y, ">=": x >= y}[op]


def _values(record, prop):
    low = {k.lower(): v for k, v in record.items()}
    if prop.lower() not in low:
        return None
    v = low[prop.lower()]
    if v is None:
        return []
    return [x for x in v if x is not None] if isinstance(v, (list, tuple)) else [v]


def cql_oracle(node, record) -> bool:
    """Interpret a CQL tree given as nested tuples (see ``tests.test_cql``)."""
    tag = node[0]
    if tag == "and":
        return cql_oracle(node[1], record) and cql_oracle(node[2], record)
    if tag == "or":
        return cql_oracle(node[1], record) or cql_oracle(node[2], record)
    if tag == "not":
        return not cql_oracle(node[1], record)
    if tag == "cmp":
        vals = _values(record, node[1])
        return vals is not None and any(_cmp(v, node[2], node[3]) for v in vals)
    if tag == "like":
        vals = _values(record, node[1])
        return vals is not None and any(_wild(_txt(v), node[2]) for v in vals)
    if tag == "anytext":
        parts = []
        for f in ("title", "abstract", "keywords"):
            vals = _values(record, f)
            if vals:
                parts += [_txt(v) for v in vals]
        return _wild(" ".join(parts), node[1])
    if tag == "bbox":
        vals = _values(record, "bbox")
        if not vals or len(vals) != 4:
            return False
        a, b = vals, node[1:]
        return not (a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1])
    raise ValueError(tag)


# --- Jenks -----------------------------------------------------------------

def jenks_oracle(values, k):
    """Exhaustive search over every contiguous k-partition, exact arithmetic.

    Returns the break indices of the cheapest partition; combinations are
    generated in lexicographic order and only a strictly better cost replaces
    the incumbent, which realises the lexicographic tie-break.
    """
    xs = sorted(Fraction(v) for v in values)
    n = len(xs)
    cuts = [b for b in range(1, n) if xs[b - 1] != xs[b]]
    best = None
    for combo in itertools.combinations(cuts, k - 1):
        bounds = (0, *combo, n)
        cost = Fraction(0)
        for lo, hi in zip(bounds, bounds[1:]):
            seg = xs[lo:hi]
            mean = sum(seg) / len(seg)
            cost += sum((v - mean) ** 2 for v in seg)
        if best is None or cost < best[0]:
            best = (cost, combo)
    return best[1], best[0]


# --- workflows -------------------------------------------------------------

def plans_oracle(layer_kinds, profiles, goal, max_len=3):
    """Shortest, then lexicographically smallest, profile sequence reaching ``goal``.

    ``profiles`` maps id -> (input kinds, output kinds). Returns () when the
    goal is already available and None when no sequence up to ``max_len`` works.
    """
    start = set(layer_kinds)
    if goal in start:
        return ()
    ids = sorted(profiles)
    for length in range(1, max_len + 1):
        for seq in itertools.product(ids, repeat=length):
            have = set(start)
            ok = True
            for pid in seq:
                ins, outs = profiles[pid]
                if not set(ins) <= have:
                    ok = False
                    break
                have |= set(outs)
            if ok and goal in profiles[seq[-1]][1]:
                return seq
    return None


# --- semantic matching -----------------------------------------------------

def token_scan(text: str) -> list[str]:
    """Split on anything that is not a letter or digit, without regular expressions."""
    tokens, cur = [], []
    for ch in text:
        if ch.isalnum():
            cur.append(ch.lower())
        elif cur:
            tokens.append("".join(cur))
            cur = []
    if cur:
        tokens.append("".join(cur))
    return tokens


def phrase_hits(texts, terms) -> set[str]:
    hits = set()
    for text in texts:
        toks = token_scan(text)
        for term in terms:
            want = term.split()
            for i in range(len(toks) - len(want) + 1):
                if toks[i:i + len(want)] == want:
                    hits.add(term)
                    break
    return hits


# --- capabilities ----------------------------------------------------------

_TAG = re.compile(r"<(/?)([A-Za-z_][\w.:-]*)([^>]*?)(/?)>")


def named_layer_count(xml_text: str) -> int:
    """Count layer-like elements that carry a Name child, by scanning tags.

    WMS: leaf Layer elements with a direct Name. WFS: FeatureType elements.
    WCS: CoverageOfferingBrief / CoverageSummary elements with a name or id.
    """
    local = lambda tag: tag.split(":")[-1]
    stack = []  # [local name, has_name, has_child_layer]
    count = 0
    for m in _TAG.finditer(xml_text):
        closing, tag, _, selfclosing = m.group(1), local(m.group(2)), m.group(3), m.group(4)
        if tag.startswith("?") or tag.startswith("!"):
            continue
        if closing:
            name, has_name, has_child = stack.pop()
            if name == "Layer" and has_name and not has_child:
                count += 1
            elif name in ("FeatureType", "CoverageOfferingBrief", "CoverageSummary") and has_name:
                count += 1
            continue
        if selfclosing:
            continue
        if stack and tag in ("Name", "name", "Identifier", "CoverageId") \
                and stack[-1][0] in ("Layer", "FeatureType", "CoverageOfferingBrief",
                                     "CoverageSummary"):
            stack[-1][1] = True
        if tag == "Layer" and stack and stack[-1][0] == "Layer":
            stack[-1][2] = True
        stack.append([tag, False, False])
    return count
