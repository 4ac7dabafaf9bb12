"""Recursive-descent parser for the CQL subset.

Grammar::

    expr      := or
    or        := and ("OR" and)*
    and       := unary ("AND" unary)*
    unary     := "NOT" unary | "(" expr ")" | predicate
    predicate := ident compOp literal
               | ident "LIKE" string
               | "AnyText" "LIKE" string
               | "BBOX" "(" num "," num "," num "," num ")"

Keywords are case-insensitive, identifiers are runs of ASCII letters and
underscores, strings are single-quoted with ``''`` as the escaped quote.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from atmocat.cql.ast import (
    COMPARISON_OPS, And, AnyTextLike, BboxIntersects, Comparison, Expr, Like, Not, Or,
)
from atmocat.errors import CqlSyntaxError

KEYWORDS = {"AND", "OR", "NOT", "LIKE"}

_NUMBER = re.compile(r"-?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_]+")
_OPS = ("<=", ">=", "<>", "=", "<", ">")


@dataclass(frozen=True)
class Token:
    kind: str  # ident, keyword, string, number, op, punct, eof
    value: object
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "(),":
            tokens.append(Token("punct", ch, i))
            i += 1
            continue
        if ch == "'":
            start, i, buf = i, i + 1, []
            while True:
                if i >= n:
                    raise CqlSyntaxError("unterminated string", start)
                if text[i] == "'":
                    if i + 1 < n and text[i + 1] == "'":
                        buf.append("'")
                        i += 2
                        continue
                    i += 1
                    break
                buf.append(text[i])
                i += 1
            tokens.append(Token("string", "".join(buf), start))
            continue
        op = next((o for o in _OPS if text.startswith(o, i)), None)
        if op:
            tokens.append(Token("op", op, i))
            i += len(op)
            continue
        m = _NUMBER.match(text, i)
        if m:
            raw = m.group()
            value = float(raw) if any(c in raw for c in ".eE") else int(raw)
            tokens.append(Token("number", value, i))
            i = m.end()
            continue
        m = _IDENT.match(text, i)
        if m:
            word = m.group()
            kind = "keyword" if word.upper() in KEYWORDS else "ident"
            tokens.append(Token(kind, word.upper() if kind == "keyword" else word, i))
            i = m.end()
            continue
        raise CqlSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(Token("eof", None, n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def fail(self, expected: str):
        tok = self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.value)
        raise CqlSyntaxError(f"expected {expected}, found {found}", tok.pos)

    def accept_keyword(self, word: str) -> bool:
        if self.tok.kind == "keyword" and self.tok.value == word:
            self.advance()
            return True
        return False

    def expect(self, kind: str, value=None, what: str | None = None) -> Token:
        tok = self.tok
        if tok.kind != kind or (value is not None and tok.value != value):
            self.fail(what or (repr(value) if value is not None else kind))
        return self.advance()

    def parse(self) -> Expr:
        expr = self.parse_or()
        if self.tok.kind != "eof":
            self.fail("AND, OR or end of input")
        return expr

    def parse_or(self) -> Expr:
        left = self.parse_and()
        while self.accept_keyword("OR"):
            left = Or(left, self.parse_and())
        return left

    def parse_and(self) -> Expr:
        left = self.parse_unary()
        while self.accept_keyword("AND"):
            left = And(left, self.parse_unary())
        return left

    def parse_unary(self) -> Expr:
        if self.accept_keyword("NOT"):
            return Not(self.parse_unary())
        if self.tok.kind == "punct" and self.tok.value == "(":
            self.advance()
            inner = self.parse_or()
            self.expect("punct", ")")
            return inner
        return self.parse_predicate()

    def number(self) -> float:
        return self.expect("number", what="a number").value

    def parse_predicate(self) -> Expr:
        if self.tok.kind != "ident":
            self.fail("a property name, NOT or '('")
        name = self.advance().value
        upper = name.upper()
        if upper == "BBOX" and self.tok.kind == "punct" and self.tok.value == "(":
            self.advance()
            values = [self.number()]
            for _ in range(3):
                self.expect("punct", ",")
                values.append(self.number())
            self.expect("punct", ")")
            return BboxIntersects(*values)
        if self.accept_keyword("LIKE"):
            pattern = self.expect("string", what="a quoted pattern").value
            if upper == "ANYTEXT":
                return AnyTextLike(pattern)
            return Like(name, pattern)
        if self.tok.kind == "op" and self.tok.value in COMPARISON_OPS:
            op = self.advance().value
            if self.tok.kind not in ("string", "number"):
                self.fail("a string or number literal")
            return Comparison(name, op, self.advance().value)
        self.fail("a comparison operator or LIKE")


def parse_cql(text: str) -> Expr:
    """Parse CQL text; raises CqlSyntaxError carrying the character position."""
    if not isinstance(text, str):
        raise TypeError("CQL text must be a string")
    return _Parser(text).parse()
