"""Atmospheric-relevance filtering against a controlled keyword vocabulary."""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable

from atmocat.errors import EmptyVocabulary

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)
MAX_PHRASE_TOKENS = 6


def tokenize(text: str) -> list[str]:
    """Case-folded maximal alphanumeric runs.

    Folding goes through ``upper()`` first so that uppercasing the input can
    never change the tokens.
    """
    return _TOKEN.findall(text.upper().casefold())


@dataclass(frozen=True)
class Vocabulary:
    terms: frozenset[str]
    source_label: str = ""

    def __post_init__(self):
        # token sequence -> terms, indexed by first token for the matcher
        index: dict[str, dict[tuple[str, ...], set[str]]] = {}
        for term in self.terms:
            toks = tuple(tokenize(term))
            if toks:
                index.setdefault(toks[0], {}).setdefault(toks, set()).add(term)
        object.__setattr__(self, "_index", index)

    def __len__(self):
        return len(self.terms)

    def __contains__(self, term):
        return term in self.terms

    def with_terms(self, extra: Iterable[str]) -> "Vocabulary":
        return Vocabulary(self.terms | {_normalize_term(t) for t in extra if _normalize_term(t)},
                          self.source_label)


def _normalize_term(line: str) -> str:
    # collapse inner whitespace so "atmospheric  pressure" equals "atmospheric pressure"
    return " ".join(line.strip().lower().split())


def load_vocabulary(lines: Iterable[str], source_label: str = "") -> Vocabulary:
    """Build a vocabulary from one term per line; blank and ``#`` lines are skipped."""
    terms = set()
    for line in lines:
        term = _normalize_term(line)
        if not term or term.startswith("#"):
            continue
        if len(tokenize(term)) > MAX_PHRASE_TOKENS:
            raise ValueError(f"vocabulary phrase longer than {MAX_PHRASE_TOKENS} tokens: {term!r}")
        if not tokenize(term):
            continue
        terms.add(term)
    if not terms:
        raise EmptyVocabulary(f"no terms loaded from {source_label or 'input'}")
    return Vocabulary(frozenset(terms), source_label)


def load_vocabulary_file(path) -> Vocabulary:
    with open(path, encoding="utf-8") as fh:
        return load_vocabulary(fh, source_label=str(path))


def default_vocabulary() -> Vocabulary:
    text = resources.files("atmocat.data").joinpath("gcmd_atmosphere.txt").read_text("utf-8")
    return load_vocabulary(text.splitlines(), source_label="gcmd_atmosphere.txt")


@dataclass(frozen=True)
class RelevanceVerdict:
    matched_terms: frozenset[str]
    score: int
    relevant: bool


def score_relevance(texts: Iterable[str], vocab: Vocabulary, threshold: int = 1) -> RelevanceVerdict:
    """Count distinct vocabulary phrases occurring as whole-token runs in ``texts``.

    Each text field is tokenized separately, so a phrase never spans two fields.
    """
    if threshold < 1:
        raise ValueError("threshold must be a positive integer")
    matched: set[str] = set()
    for text in texts:
        tokens = tokenize(text or "")
        for i, tok in enumerate(tokens):
            for phrase, terms in vocab._index.get(tok, {}).items():
                if tuple(tokens[i:i + len(phrase)]) == phrase:
                    matched |= terms
    return RelevanceVerdict(frozenset(matched), len(matched), len(matched) >= threshold)
