"""Tokenization and sentence segmentation shared across the pipeline."""

from __future__ import annotations

import re
from typing import Iterable, Protocol

# letters/digits form one token; every other non-space character is its own token
_TOKEN_RE = re.compile(r"[^\W_]+|[^\w\s]|_")
_WORD_RE = re.compile(r"[^\W_]+")

DEFAULT_ABBREVIATIONS = ("Dr", "Mr", "Mrs", "Ms", "Prof", "Fig", "et al", "e.g", "i.e", "vs")


class Tokenizer(Protocol):
    def tokenize(self, text: str) -> list[str]: ...

    def count(self, text: str) -> int: ...


class RegexTokenizer:
    """Rule-based tokenizer used for every token count in the package.

    A maximal run of letters/digits is one token and each remaining
    non-whitespace character is one token, so ``"don't"`` is three tokens.
    """

    def tokenize(self, text: str) -> list[str]:
        return _TOKEN_RE.findall(text)

    def spans(self, text: str) -> list[tuple[int, int]]:
        return [m.span() for m in _TOKEN_RE.finditer(text)]

    def count(self, text: str) -> int:
        return sum(1 for _ in _TOKEN_RE.finditer(text))


DEFAULT_TOKENIZER = RegexTokenizer()


def word_tokens(text: str) -> list[str]:
    """Lowercased letter/digit runs."""
    return [w.lower() for w in _WORD_RE.findall(text)]


def count_tokens(tokenizer: Tokenizer | None, text: str) -> int:
    return (tokenizer or DEFAULT_TOKENIZER).count(text)


def _abbreviation_re(abbreviations: Iterable[str]) -> re.Pattern:
    alts = "|".join(re.escape(a) for a in sorted(abbreviations, key=len, reverse=True))
    return re.compile(r"(?<![^\s(\[\"'])(?:%s)$" % alts, re.IGNORECASE)


_BOUNDARY_RE = re.compile(r"[.!?]\s+(?=[A-Z0-9])")
_DEFAULT_ABBREV_RE = _abbreviation_re(DEFAULT_ABBREVIATIONS)


def segment_sentences(text: str, abbreviations: Iterable[str] | None = None) -> list[str]:
    """Split ``text`` into sentences.

    A boundary is a ``.``, ``!`` or ``?`` followed by whitespace and then an
    uppercase letter or digit. A period directly after one of
    ``abbreviations`` is not a boundary. Returned sentences are stripped of
    surrounding whitespace; empty input gives an empty list.
    """
    abbrev_re = _DEFAULT_ABBREV_RE if abbreviations is None else _abbreviation_re(abbreviations)
    sentences = []
    start = 0
    for m in _BOUNDARY_RE.finditer(text):
        end = m.start() + 1
        if text[m.start()] == "." and abbrev_re.search(text[max(start, m.start() - 12):m.start()]):
            continue
        piece = text[start:end].strip()
        if piece:
            sentences.append(piece)
        start = m.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences
