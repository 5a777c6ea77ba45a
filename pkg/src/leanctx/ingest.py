"""Corpus ingestion: chunking, embedding, an in-memory vector store and context assembly."""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np

from .errors import (DimensionMismatch, EmptyDocument, EmptyInput, EmptyStore, InvalidConfig,
                     LeanCtxError)
from .text import DEFAULT_TOKENIZER, RegexTokenizer, segment_sentences, word_tokens

__all__ = [
    "Document", "Chunk", "Context", "StoreConfig", "VectorStore", "HashEmbedder", "HTTPEmbedder",
    "split_document", "embed_text", "retrieve_top_n", "build_context", "load_corpus",
]

UNITS = ("tokens", "characters")


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str


@dataclass
class Chunk:
    chunk_id: str
    doc_id: str
    seq_index: int
    text: str
    embedding: np.ndarray | None = None

    @property
    def order_key(self) -> tuple[str, int]:
        return (self.doc_id, self.seq_index)


@dataclass
class Context:
    query_id: str
    sentences: list[str]
    source_chunk_ids: list[str] = field(default_factory=list)

    @property
    def text(self) -> str:
        return " ".join(self.sentences)


@dataclass(frozen=True)
class StoreConfig:
    chunk_size: int = 500
    chunk_overlap: int = 0
    unit: str = "tokens"

    def __post_init__(self):
        if self.chunk_size <= 0:
            raise InvalidConfig("chunk_size must be positive")
        if self.chunk_overlap < 0 or self.chunk_overlap >= self.chunk_size:
            raise InvalidConfig("chunk_overlap must satisfy 0 <= overlap < chunk_size")
        if self.unit not in UNITS:
            raise InvalidConfig(f"unit must be one of {UNITS}")


def _unit_starts(text: str, unit: str, tokenizer: RegexTokenizer) -> list[int]:
    if unit == "characters":
        return list(range(len(text)))
    return [s for s, _ in tokenizer.spans(text)]


def split_document(doc: Document, chunk_size: int, overlap: int = 0, *, unit: str = "tokens",
                   tokenizer: RegexTokenizer | None = None) -> list[Chunk]:
    """Cut ``doc`` into sliding windows of ``chunk_size`` units.

    Windows start every ``chunk_size - overlap`` units and the last one ends
    at the final unit. A chunk's text runs from its first unit up to the
    start of the unit after its last one, so with ``overlap=0`` the chunks
    concatenate back to ``doc.text`` exactly (leading whitespace goes to the
    first chunk, trailing whitespace to the last).
    """
    if overlap < 0 or overlap >= chunk_size:
        raise InvalidConfig(f"overlap {overlap} must be in [0, chunk_size={chunk_size})")
    if unit not in UNITS:
        raise InvalidConfig(f"unit must be one of {UNITS}")
    if not doc.text or not doc.text.strip():
        raise EmptyDocument(f"document {doc.doc_id!r} is empty")
    starts = _unit_starts(doc.text, unit, tokenizer or DEFAULT_TOKENIZER)
    n = len(starts)
    step = chunk_size - overlap
    chunks = []
    lo = 0
    while True:
        hi = min(lo + chunk_size, n)
        begin = 0 if lo == 0 else starts[lo]
        end = starts[hi] if hi < n else len(doc.text)
        chunks.append(Chunk(f"{doc.doc_id}#{len(chunks)}", doc.doc_id, len(chunks),
                            doc.text[begin:end]))
        if hi >= n:
            return chunks
        lo += step


class Embedder(Protocol):
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


def _normalize(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise EmptyInput("cannot normalise a zero vector")
    return vec / norm


class HashEmbedder:
    """Feature-hashed bag of words, L2-normalised.

    Each lowercased letter/digit run adds 1 to bucket
    ``int(md5(word)[:8], 16) % dimension``. Text with no such runs falls back
    to hashing its punctuation characters so the result is never zero.
    """

    kind = "hash"

    def __init__(self, dimension: int = 64):
        if dimension <= 0:
            raise InvalidConfig("dimension must be positive")
        self.dimension = dimension

    @staticmethod
    def bucket(word: str, dimension: int) -> int:
        return int(hashlib.md5(word.encode("utf-8")).hexdigest()[:8], 16) % dimension

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmptyInput("cannot embed blank text")
        words = word_tokens(text) or DEFAULT_TOKENIZER.tokenize(text)
        vec = np.zeros(self.dimension)
        for w in words:
            vec[self.bucket(w, self.dimension)] += 1.0
        return _normalize(vec)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dimension": self.dimension}


class HTTPEmbedder:
    """Embeddings from an OpenAI-compatible ``/v1/embeddings`` endpoint."""

    kind = "http"

    def __init__(self, client, dimension: int):
        self.client = client
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmptyInput("cannot embed blank text")
        vec = np.asarray(self.client.embed(text), dtype=float)
        if vec.shape != (self.dimension,):
            raise DimensionMismatch(f"endpoint returned {vec.shape}, expected ({self.dimension},)")
        return _normalize(vec)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dimension": self.dimension}


def embed_text(text: str, embedder: Embedder | None = None) -> np.ndarray:
    return (embedder or HashEmbedder()).embed(text)


class VectorStore:
    """Exact cosine-similarity index over unit-norm chunk embeddings.

    Ingestion must finish before concurrent readers start; reads take no
    locks. ``add_documents`` serialises writers.
    """

    def __init__(self, embedder: Embedder | None = None, config: StoreConfig | None = None,
                 tokenizer: RegexTokenizer | None = None):
        self.embedder = embedder or HashEmbedder()
        self.dimension = self.embedder.dimension
        self.config = config or StoreConfig()
        self.tokenizer = tokenizer or DEFAULT_TOKENIZER
        self.chunks: list[Chunk] = []
        self._matrix: np.ndarray | None = None
        self._doc_ids: set[str] = set()
        self._write_lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.chunks)

    def add_documents(self, docs: Iterable[Document]) -> list[Chunk]:
        added = []
        with self._write_lock:
            for doc in docs:
                if not doc.doc_id:
                    raise InvalidConfig("doc_id must be non-empty")
                if doc.doc_id in self._doc_ids:
                    raise InvalidConfig(f"duplicate doc_id {doc.doc_id!r}")
                pieces = split_document(doc, self.config.chunk_size, self.config.chunk_overlap,
                                        unit=self.config.unit, tokenizer=self.tokenizer)
                for c in pieces:
                    c.embedding = self.embedder.embed(c.text) if c.text.strip() else None
                # whitespace-only character windows carry nothing to embed
                pieces = [c for c in pieces if c.embedding is not None]
                for i, c in enumerate(pieces):
                    c.seq_index, c.chunk_id = i, f"{doc.doc_id}#{i}"
                self._doc_ids.add(doc.doc_id)
                self.chunks.extend(pieces)
                added.extend(pieces)
            self._matrix = None
        return added

    def add_chunks(self, chunks: Iterable[Chunk]) -> None:
        with self._write_lock:
            for c in chunks:
                emb = np.asarray(c.embedding, dtype=float)
                if emb.shape != (self.dimension,):
                    raise DimensionMismatch(f"chunk {c.chunk_id} has shape {emb.shape}")
                c.embedding = emb
                self._doc_ids.add(c.doc_id)
                self.chunks.append(c)
            self._matrix = None

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.array([c.embedding for c in self.chunks]).reshape(-1, self.dimension)
        return self._matrix

    def corpus_texts(self) -> list[str]:
        return [c.text for c in self.chunks]

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "embedder": self.embedder.to_dict(),
            "config": {"chunk_size": self.config.chunk_size,
                       "chunk_overlap": self.config.chunk_overlap,
                       "unit": self.config.unit},
            "chunks": [{"chunk_id": c.chunk_id, "doc_id": c.doc_id, "seq_index": c.seq_index,
                        "text": c.text, "embedding": [float(x) for x in c.embedding]}
                       for c in self.chunks],
        }

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def from_dict(cls, data: dict, embedder: Embedder | None = None) -> "VectorStore":
        try:
            dim = int(data["dimension"])
            cfg = StoreConfig(**data["config"])
            raw = data["chunks"]
        except (KeyError, TypeError) as exc:
            raise InvalidConfig(f"malformed store snapshot: {exc}") from exc
        if embedder is None:
            spec = data.get("embedder", {"kind": "hash", "dimension": dim})
            if spec.get("kind") != "hash":
                raise InvalidConfig("snapshot uses a remote embedder; pass one explicitly")
            embedder = HashEmbedder(dim)
        if embedder.dimension != dim:
            raise DimensionMismatch(f"snapshot dimension {dim} != embedder {embedder.dimension}")
        store = cls(embedder, cfg)
        store.add_chunks(Chunk(r["chunk_id"], r["doc_id"], int(r["seq_index"]), r["text"],
                               r["embedding"]) for r in raw)
        return store

    @classmethod
    def load(cls, path: str | os.PathLike, embedder: Embedder | None = None) -> "VectorStore":
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InvalidConfig(f"{path}: not a store snapshot ({exc})") from exc
        return cls.from_dict(data, embedder)


def retrieve_top_n(store: VectorStore, query_embedding: np.ndarray, n: int) -> list[Chunk]:
    """Global top-``n`` chunks by cosine similarity, ties by ``(doc_id, seq_index)``."""
    if len(store) == 0:
        raise EmptyStore("vector store is empty")
    if n <= 0:
        raise InvalidConfig("N must be positive")
    q = np.asarray(query_embedding, dtype=float)
    if q.shape != (store.dimension,):
        raise DimensionMismatch(f"query has shape {q.shape}, store dimension is {store.dimension}")
    sims = store.matrix @ q
    order = sorted(range(len(store)), key=lambda i: (-sims[i], store.chunks[i].order_key))
    return [store.chunks[i] for i in order[:n]]


def build_context(store: VectorStore, query: str, n: int, *, query_id: str = "") -> Context:
    """Retrieve ``n`` chunks and lay their sentences out in document order."""
    hits = retrieve_top_n(store, store.embedder.embed(query), n)
    hits = sorted(hits, key=lambda c: c.order_key)
    sentences: list[str] = []
    for c in hits:
        sentences.extend(segment_sentences(c.text))
    return Context(query_id, sentences, [c.chunk_id for c in hits])


class CorpusFormatError(LeanCtxError, ValueError):
    pass


def read_jsonl(path: str | os.PathLike, required: Sequence[str]) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(row, dict):
                raise CorpusFormatError(f"{path}:{lineno}: expected an object")
            missing = [k for k in required if not isinstance(row.get(k), str) or not row[k]]
            if missing:
                raise CorpusFormatError(f"{path}:{lineno}: missing or empty field(s) {missing}")
            rows.append(row)
    return rows


def load_corpus(path: str | os.PathLike) -> list[Document]:
    return [Document(r["doc_id"], r["text"]) for r in read_jsonl(path, ("doc_id", "text"))]
