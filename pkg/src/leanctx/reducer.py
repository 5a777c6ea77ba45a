"""Query-aware context reduction.

Sentences are ranked against the query, the top-k are kept verbatim and
every maximal run of the remaining sentences is compressed by dropping its
least informative tokens. The result is stitched back together in the
original sentence order.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyInput, InvalidRate, InvalidThreshold
from .ingest import Context, Embedder, HashEmbedder
from .text import DEFAULT_TOKENIZER, Tokenizer, segment_sentences

__all__ = [
    "RankedSentence", "ReducedContext", "UnigramModel", "Reducer", "segment_sentences",
    "rank_sentences", "top_k_count", "select_top_k", "reduce_fragment", "stitch", "MAX_THRESHOLD",
]

MAX_THRESHOLD = 0.4
_EPS = 1e-12


@dataclass(frozen=True)
class RankedSentence:
    index: int
    similarity: float


@dataclass
class ReducedContext:
    kept_indices: list[int]
    fragments: list[tuple[int, str]]
    text: str
    original_tokens: int
    reduced_tokens: int

    @property
    def tau(self) -> float:
        if self.original_tokens == 0:
            return 1.0
        return self.reduced_tokens / self.original_tokens


class SelfInformationProvider(Protocol):
    def information(self, unit: str) -> float: ...


class UnigramModel:
    """Unigram self-information, ``I(u) = -log2 p(u)`` in bits.

    ``from_corpus`` applies add-one smoothing with one reserved slot for
    unseen units, so anything outside the vocabulary scores the maximum.
    Units are matched case-insensitively.
    """

    def __init__(self, probabilities: Mapping[str, float], unseen_probability: float):
        if not 0 < unseen_probability <= 1:
            raise ValueError("unseen_probability must be in (0, 1]")
        self.probabilities = {k.lower(): float(v) for k, v in probabilities.items()}
        self.unseen_probability = unseen_probability

    @classmethod
    def from_corpus(cls, texts: Iterable[str], tokenizer: Tokenizer | None = None) -> "UnigramModel":
        tok = tokenizer or DEFAULT_TOKENIZER
        counts = Counter(u.lower() for t in texts for u in tok.tokenize(t))
        denom = sum(counts.values()) + len(counts) + 1
        return cls({u: (c + 1) / denom for u, c in counts.items()}, 1 / denom)

    def information(self, unit: str) -> float:
        p = self.probabilities.get(unit.lower(), self.unseen_probability)
        return -math.log2(p)


def rank_sentences(context: Context, query_embedding: np.ndarray,
                   embedder: Embedder | None = None) -> list[RankedSentence]:
    """All sentence indices ordered by cosine similarity to the query, ties by index."""
    if not context.sentences:
        raise EmptyInput("context has no sentences")
    embedder = embedder or HashEmbedder()
    q = np.asarray(query_embedding, dtype=float)
    if q.shape != (embedder.dimension,):
        raise DimensionMismatch(f"query has shape {q.shape}, embedder dimension {embedder.dimension}")
    sims = [float(embedder.embed(s) @ q) for s in context.sentences]
    order = sorted(range(len(sims)), key=lambda i: (-sims[i], i))
    return [RankedSentence(i, sims[i]) for i in order]


def _check_threshold(theta: float) -> None:
    if not (-_EPS <= theta <= MAX_THRESHOLD + _EPS):
        raise InvalidThreshold(f"threshold {theta} outside [0, {MAX_THRESHOLD}]")


def top_k_count(theta: float, n: int) -> int:
    """``0`` for a zero threshold, else ``max(1, round_half_up(theta * n))``."""
    _check_threshold(theta)
    if theta <= _EPS:
        return 0
    return min(n, max(1, math.floor(theta * n + 0.5 + _EPS)))


def select_top_k(ranked: Sequence[RankedSentence], theta: float, n: int | None = None) -> list[int]:
    n = len(ranked) if n is None else n
    k = top_k_count(theta, n)
    return sorted(r.index for r in ranked[:k])


def _keep_budget(n_units: int, rate: float) -> int:
    # round before ceil: (1 - 0.7) * 10 must give 3, not 4
    return max(1, math.ceil(round((1.0 - rate) * n_units, 9)))


def reduce_fragment(sentences: Sequence[str], rate: float, provider: SelfInformationProvider,
                    tokenizer: Tokenizer | None = None) -> str:
    """Drop the least informative tokens until at most ``ceil((1-rate)*T)`` remain.

    Lexical units are tokenizer tokens, so the output token count is exact.
    Among equally informative units the earlier occurrence is dropped first.
    Survivors keep their order; originally adjacent survivors keep their
    original spacing, everything else is joined by one space.
    """
    if not 0 <= rate < 1:
        raise InvalidRate(f"rate {rate} must be in [0, 1)")
    text = " ".join(sentences)
    tok = tokenizer or DEFAULT_TOKENIZER
    if hasattr(tok, "spans"):
        spans = tok.spans(text)
        units = [text[a:b] for a, b in spans]
    else:
        units = tok.tokenize(text)
        spans = None
    if not units:
        return ""
    budget = _keep_budget(len(units), rate)
    n_drop = len(units) - budget
    if n_drop <= 0:
        keep = range(len(units))
    else:
        order = sorted(range(len(units)), key=lambda i: (provider.information(units[i]), i))
        dropped = set(order[:n_drop])
        keep = [i for i in range(len(units)) if i not in dropped]
    parts = []
    prev = None
    for i in keep:
        if prev is not None:
            if spans is not None and i == prev + 1:
                gap = text[spans[prev][1]:spans[i][0]]
                parts.append(gap if gap == "" else " ")
            else:
                parts.append(" ")
        parts.append(units[i])
        prev = i
    return "".join(parts)


def stitch(context: Context, kept: Iterable[int], rate: float, provider: SelfInformationProvider,
           tokenizer: Tokenizer | None = None) -> ReducedContext:
    """Emit kept sentences verbatim and compress each maximal run between them."""
    tok = tokenizer or DEFAULT_TOKENIZER
    sentences = context.sentences
    kept_set = set(kept)
    bad = [i for i in kept_set if not 0 <= i < len(sentences)]
    if bad:
        raise IndexError(f"kept indices out of range: {sorted(bad)}")
    pieces: list[str] = []
    fragments: list[tuple[int, str]] = []
    run: list[str] = []
    run_start = 0

    def flush():
        if run:
            reduced = reduce_fragment(run, rate, provider, tok)
            fragments.append((run_start, reduced))
            if reduced:
                pieces.append(reduced)
            run.clear()

    for i, s in enumerate(sentences):
        if i in kept_set:
            flush()
            pieces.append(s)
        else:
            if not run:
                run_start = i
            run.append(s)
    flush()
    text = " ".join(pieces)
    return ReducedContext(
        kept_indices=sorted(kept_set),
        fragments=fragments,
        text=text,
        original_tokens=tok.count(" ".join(sentences)),
        reduced_tokens=tok.count(text),
    )


@dataclass
class Reducer:
    """Bundles the pieces needed to turn ``(context, query, theta)`` into a reduced context."""

    embedder: Embedder = field(default_factory=HashEmbedder)
    provider: SelfInformationProvider = field(default_factory=lambda: UnigramModel({}, 1.0))
    tokenizer: Tokenizer = DEFAULT_TOKENIZER
    rate: float = 0.8

    def __post_init__(self):
        if not 0 <= self.rate < 1:
            raise InvalidRate(f"rate {self.rate} must be in [0, 1)")

    def rank(self, context: Context, query: str) -> list[RankedSentence]:
        return rank_sentences(context, self.embedder.embed(query), self.embedder)

    def reduce(self, context: Context, query: str, theta: float) -> ReducedContext:
        _check_threshold(theta)
        if top_k_count(theta, len(context.sentences)) == 0:
            kept = []
        else:
            kept = select_top_k(self.rank(context, query), theta, len(context.sentences))
        return stitch(context, kept, self.rate, self.provider, self.tokenizer)
