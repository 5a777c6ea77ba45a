"""ROUGE-N and ROUGE-L over lowercased tokens (no stemming, no stopword removal)."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .text import DEFAULT_TOKENIZER, Tokenizer

__all__ = ["RougeScore", "rouge_n", "rouge_l", "lcs_length", "rouge_tokens"]


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, overlap: int, n_candidate: int, n_reference: int) -> "RougeScore":
        if n_candidate == 0 or n_reference == 0:
            return cls(0.0, 0.0, 0.0)
        p = overlap / n_candidate
        r = overlap / n_reference
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(p, r, f)

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


def rouge_tokens(text: str, tokenizer: Tokenizer | None = None) -> list[str]:
    return [t.lower() for t in (tokenizer or DEFAULT_TOKENIZER).tokenize(text)]


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: str, reference: str, n: int = 1,
            tokenizer: Tokenizer | None = None) -> RougeScore:
    if n not in (1, 2):
        raise ValueError("n must be 1 or 2")
    cand = _ngrams(rouge_tokens(candidate, tokenizer), n)
    ref = _ngrams(rouge_tokens(reference, tokenizer), n)
    overlap = sum((cand & ref).values())
    return RougeScore.from_counts(overlap, sum(cand.values()), sum(ref.values()))


def lcs_length(a: list[str], b: list[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str, tokenizer: Tokenizer | None = None) -> RougeScore:
    cand = rouge_tokens(candidate, tokenizer)
    ref = rouge_tokens(reference, tokenizer)
    return RougeScore.from_counts(lcs_length(cand, ref), len(cand), len(ref))
