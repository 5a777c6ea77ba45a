"""Prompt templates, completion providers and token/cost accounting."""

from __future__ import annotations

import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from typing import Protocol

import requests

from .errors import ContextTooLarge, ProviderError, TemplateArityError
from .text import DEFAULT_TOKENIZER, Tokenizer, count_tokens, segment_sentences, word_tokens

__all__ = [
    "TEMPLATES", "PromptTemplate", "CompletionRecord", "CostModel", "MockLLM",
    "OpenAICompatibleClient", "render_prompt", "complete", "count_tokens", "cost",
    "cost_savings", "API_KEY_ENV",
]

log = logging.getLogger(__name__)

API_KEY_ENV = "LEANCTX_API_KEY"
NO_ANSWER = "No answer"


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    text: str

    @property
    def takes_query(self) -> bool:
        return "{QUERY}" in self.text


QA = PromptTemplate(
    "qa",
    "Answer to the question based on the given context. Context: {CONTEXT}, \n"
    "Question: {QUERY}, if you do not find any answer in the context, "
    "simply return 'No answer'",
)
CQSUMDP = PromptTemplate(
    "cqsumdp",
    "A document along with its query is given below. Write down the most reasonable "
    "summary relevant to its document-query pair.\n"
    "Document: {CONTEXT}\n"
    "Query: {QUERY}",
)
SEMANTIC_COMPRESSION = PromptTemplate(
    "semantic_compression",
    "Please compress the following text into a latent representation that a different "
    "gpt-3.5-turbo model can decompress into the original text. The compression model "
    "should purely minimize the number of characters in the compressed representation "
    "while maintaining the semantics of the original text. The resulting compressed text "
    "does not need to be decompressed into the original text but should capture the "
    "semantics of the original text. The compressed text should be able to be decompressed "
    "into a text that is semantically similar to the original text but does not need to "
    "be identical.\n"
    "Text to Compress: {CONTEXT}",
)
TEMPLATES = {t.name: t for t in (QA, CQSUMDP, SEMANTIC_COMPRESSION)}

_PLACEHOLDER_RE = re.compile(r"\{(CONTEXT|QUERY)\}")


def render_prompt(template: PromptTemplate | str, context: str, query: str | None = None) -> str:
    """Substitute ``context`` (and ``query``) into a template in a single pass.

    Payloads are inserted verbatim, so placeholder-like text inside the
    context is never expanded a second time.
    """
    if isinstance(template, str):
        template = TEMPLATES[template]
    if template.takes_query and query is None:
        raise TemplateArityError(f"template {template.name!r} requires a query")
    if not template.takes_query and query is not None:
        raise TemplateArityError(f"template {template.name!r} does not take a query")
    values = {"CONTEXT": context, "QUERY": query}
    return _PLACEHOLDER_RE.sub(lambda m: values[m.group(1)], template.text)


def _split_between(prompt: str, prefix: str, sep: str, suffix: str = "") -> tuple[str, str] | None:
    if not prompt.startswith(prefix) or not prompt.endswith(suffix):
        return None
    body = prompt[len(prefix):len(prompt) - len(suffix)]
    at = body.rfind(sep)
    if at < 0:
        return None
    return body[:at], body[at + len(sep):]


def parse_prompt(prompt: str) -> tuple[str, str, str | None] | None:
    """Recover ``(template_name, context, query)`` from a rendered prompt."""
    for template in TEMPLATES.values():
        head, _, rest = template.text.partition("{CONTEXT}")
        if template.takes_query:
            sep, _, tail = rest.partition("{QUERY}")
            parts = _split_between(prompt, head, sep, tail)
            if parts is not None:
                return template.name, parts[0], parts[1]
        elif prompt.startswith(head) and prompt.endswith(rest):
            return template.name, prompt[len(head):len(prompt) - len(rest)], None
    return None


@dataclass
class CompletionRecord:
    prompt_tokens: int
    completion_tokens: int
    answer: str
    summary_tokens: int = 0

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens + self.summary_tokens

    def to_dict(self) -> dict:
        return {
            "prompt_tokens": self.prompt_tokens,
            "summary_tokens": self.summary_tokens,
            "completion_tokens": self.completion_tokens,
            "total_tokens": self.total_tokens,
            "answer": self.answer,
        }


class CompletionProvider(Protocol):
    def complete(self, prompt: str) -> CompletionRecord: ...


def _overlap(sentence: str, query_words: set[str]) -> int:
    return len(set(word_tokens(sentence)) & query_words)


class MockLLM:
    """Deterministic offline stand-in for a chat model.

    QA prompts are answered extractively: the context sentence sharing the
    most distinct words with the question wins, earliest on ties. CQSumDP
    prompts return every sentence that shares a word with the query (in
    order), and semantic-compression prompts keep the first half of each
    sentence's words. ``calls`` counts completions served.
    """

    def __init__(self, tokenizer: Tokenizer | None = None):
        self.tokenizer = tokenizer or DEFAULT_TOKENIZER
        self.calls = 0
        self._lock = threading.Lock()

    def respond(self, prompt: str) -> str:
        parsed = parse_prompt(prompt)
        if parsed is None:
            sentences = segment_sentences(prompt)
            return sentences[0] if sentences else ""
        name, context, query = parsed
        sentences = segment_sentences(context)
        if not sentences:
            return NO_ANSWER
        if name == "qa":
            qwords = set(word_tokens(query))
            scores = [_overlap(s, qwords) for s in sentences]
            return sentences[scores.index(max(scores))]
        if name == "cqsumdp":
            qwords = set(word_tokens(query))
            hits = [s for s in sentences if _overlap(s, qwords) > 0]
            return " ".join(hits or sentences[:1])
        out = []
        for s in sentences:
            words = s.split()
            out.append(" ".join(words[:(len(words) + 1) // 2]))
        return " ".join(out)

    def complete(self, prompt: str) -> CompletionRecord:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        answer = self.respond(prompt)
        with self._lock:
            self.calls += 1
        return CompletionRecord(
            prompt_tokens=self.tokenizer.count(prompt),
            completion_tokens=self.tokenizer.count(answer),
            answer=answer,
        )


class OpenAICompatibleClient:
    """Minimal client for ``/v1/chat/completions`` and ``/v1/embeddings``.

    The bearer token is read from ``LEANCTX_API_KEY`` unless passed
    explicitly. Transport errors, 429 and 5xx responses are retried with
    exponential backoff; at most ``max_concurrent`` requests are in flight.
    """

    def __init__(self, base_url: str, model: str, *, embedding_model: str | None = None,
                 timeout: float = 60.0, api_key: str | None = None, max_retries: int = 3,
                 backoff: float = 0.5, max_concurrent: int = 4, temperature: float = 0.0,
                 session: requests.Session | None = None):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.embedding_model = embedding_model or model
        self.timeout = timeout
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.max_retries = max_retries
        self.backoff = backoff
        self.temperature = temperature
        self.session = session or requests.Session()
        self._slots = threading.BoundedSemaphore(max_concurrent)
        self.calls = 0

    def _post(self, path: str, payload: dict) -> dict:
        url = f"{self.base_url}{path}"
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        attempt = 0
        while True:
            attempt += 1
            try:
                with self._slots:
                    resp = self.session.post(url, json=payload, headers=headers, timeout=self.timeout)
            except (requests.ConnectionError, requests.Timeout) as exc:
                if attempt > self.max_retries:
                    raise ProviderError(f"POST {url} failed: {exc}", retryable=True,
                                        attempts=attempt) from exc
                self._sleep(attempt)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                if attempt > self.max_retries:
                    raise ProviderError(f"POST {url} returned {resp.status_code}", retryable=True,
                                        status=resp.status_code, attempts=attempt)
                self._sleep(attempt)
                continue
            if resp.status_code >= 400:
                detail = _error_detail(resp)
                if "context_length_exceeded" in detail or "maximum context length" in detail:
                    raise ContextTooLarge(detail, status=resp.status_code, attempts=attempt)
                raise ProviderError(f"POST {url} returned {resp.status_code}: {detail}",
                                    status=resp.status_code, attempts=attempt)
            try:
                return resp.json()
            except ValueError as exc:
                raise ProviderError(f"POST {url} returned invalid JSON", status=resp.status_code,
                                    attempts=attempt) from exc

    def _sleep(self, attempt: int) -> None:
        delay = self.backoff * 2 ** (attempt - 1)
        log.warning("retrying in %.2fs (attempt %d)", delay, attempt)
        time.sleep(delay)

    def complete(self, prompt: str) -> CompletionRecord:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        data = self._post("/v1/chat/completions", {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        })
        self.calls += 1
        try:
            answer = data["choices"][0]["message"]["content"] or ""
            usage = data.get("usage") or {}
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError("malformed chat completion response") from exc
        return CompletionRecord(
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            answer=answer.strip(),
        )

    def embed(self, text: str) -> list[float]:
        data = self._post("/v1/embeddings", {"model": self.embedding_model, "input": text})
        try:
            return [float(x) for x in data["data"][0]["embedding"]]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProviderError("malformed embeddings response") from exc


def _error_detail(resp: requests.Response) -> str:
    try:
        err = resp.json().get("error", {})
        if isinstance(err, dict):
            return " ".join(str(err.get(k, "")) for k in ("code", "message")).strip()
        return str(err)
    except ValueError:
        return resp.text[:200]


def complete(provider: CompletionProvider, prompt: str) -> CompletionRecord:
    return provider.complete(prompt)


@dataclass(frozen=True)
class CostModel:
    price_per_1k_prompt: float = 0.0015
    price_per_1k_completion: float = 0.002

    def __post_init__(self):
        if self.price_per_1k_prompt < 0 or self.price_per_1k_completion < 0:
            raise ValueError("prices must be non-negative")


def cost(record: CompletionRecord, model: CostModel) -> float:
    """Currency cost of one call; summarization tokens are billed as prompt input."""
    return (model.price_per_1k_prompt * (record.prompt_tokens + record.summary_tokens) / 1000
            + model.price_per_1k_completion * record.completion_tokens / 1000)


def cost_savings(total_tokens_baseline: float, total_tokens_variant: float) -> float:
    """Percent of baseline tokens saved by the variant, rounded to 2 decimals."""
    if total_tokens_baseline == 0:
        raise ZeroDivisionError("baseline token count is zero")
    return round(100.0 * (total_tokens_baseline - total_tokens_variant) / total_tokens_baseline, 2)
