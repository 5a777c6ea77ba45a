"""Run context-reduction methods over a QA set and aggregate token/ROUGE statistics."""

from __future__ import annotations

import json
import logging
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Mapping, Sequence

from .adaptive import RLAgent, policy
from .errors import InvalidConfig, LeanCtxError, ProviderError
from .ingest import Context, VectorStore, build_context, read_jsonl
from .llm import CompletionProvider, CompletionRecord, cost_savings, render_prompt
from .reducer import Reducer, select_top_k, stitch, top_k_count
from .rouge import RougeScore, rouge_l, rouge_n
from .text import segment_sentences

__all__ = [
    "QAPair", "MethodConfig", "EvalRecord", "EvalSetup", "LeadSummarizer", "CommandSummarizer",
    "METHOD_NAMES", "parse_method", "run_method", "run_experiment", "format_table", "load_qa",
]

log = logging.getLogger(__name__)

METHOD_NAMES = ("original", "fixed_k", "adaptive_k", "sc_only", "cqsumdp",
                "semantic_compression", "external", "cascade")

Summarizer = Callable[[str, "str | None"], str]


@dataclass(frozen=True)
class QAPair:
    query_id: str
    doc_id: str
    question: str
    reference_answer: str

    def __post_init__(self):
        if not self.question.strip() or not self.reference_answer.strip():
            raise InvalidConfig(f"QA pair {self.query_id!r} needs a question and a reference")


def load_qa(path) -> list[QAPair]:
    fields = ("query_id", "doc_id", "question", "reference_answer")
    return [QAPair(*(r[k] for k in fields)) for r in read_jsonl(path, fields)]


@dataclass(frozen=True)
class MethodConfig:
    """One row of a comparison table.

    ``theta`` parametrises ``fixed_k``; ``rate`` parametrises ``sc_only``;
    ``summarizer`` names the adapter for ``external``. A ``cascade`` wraps a
    ``base`` method and prepends top-k sentences picked by ``k_mode``, which
    is either a threshold or ``"rl"`` for the trained agent.
    """

    method: str
    theta: float | None = None
    rate: float | None = None
    summarizer: str | None = None
    base: "MethodConfig | None" = None
    k_mode: float | str | None = None

    def __post_init__(self):
        if self.method not in METHOD_NAMES:
            raise InvalidConfig(f"unknown method {self.method!r}; valid: {', '.join(METHOD_NAMES)}")
        if self.method == "fixed_k":
            top_k_count(_require(self.theta, "fixed_k needs a threshold"), 1)
        if self.method == "sc_only" and not 0 <= _require(self.rate, "sc_only needs a rate") < 1:
            raise InvalidConfig("sc_only rate must be in [0, 1)")
        if self.method == "external" and not self.summarizer:
            raise InvalidConfig("external needs a summarizer name")
        if self.method == "cascade":
            if self.base is None or self.base.method == "cascade":
                raise InvalidConfig("cascade needs a non-cascade base method")
            if self.k_mode != "rl":
                top_k_count(_require(self.k_mode, "cascade needs a k mode"), 1)

    @property
    def name(self) -> str:
        if self.method == "fixed_k":
            return f"fixed_k:{self.theta:g}"
        if self.method == "sc_only":
            return f"sc_only:{self.rate:g}"
        if self.method == "external":
            return f"external:{self.summarizer}"
        if self.method == "cascade":
            k = "rl" if self.k_mode == "rl" else f"{self.k_mode:g}"
            return f"cascade:{self.base.name}@{k}"
        return self.method

    @property
    def needs_agent(self) -> bool:
        return self.method == "adaptive_k" or (self.method == "cascade" and self.k_mode == "rl")


def _require(value, message):
    if value is None:
        raise InvalidConfig(message)
    return value


def _float(text: str, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise InvalidConfig(f"{what}: {text!r} is not a number") from None


def parse_method(spec: str) -> MethodConfig:
    """Parse ``fixed_k:0.1``, ``sc_only:0.5``, ``external:lead3``, ``cascade:<base>@<k|rl>``..."""
    spec = spec.strip()
    head, _, arg = spec.partition(":")
    if head == "cascade":
        base, sep, k = arg.rpartition("@")
        if not sep:
            raise InvalidConfig(f"{spec!r}: expected cascade:<base>@<threshold|rl>")
        k_mode = "rl" if k == "rl" else _float(k, spec)
        return MethodConfig("cascade", base=parse_method(base), k_mode=k_mode)
    if head == "fixed_k":
        return MethodConfig("fixed_k", theta=_float(arg, spec))
    if head == "sc_only":
        return MethodConfig("sc_only", rate=_float(arg, spec))
    if head == "external":
        return MethodConfig("external", summarizer=arg)
    if arg:
        raise InvalidConfig(f"{spec!r}: method {head!r} takes no argument")
    return MethodConfig(head)


class LeadSummarizer:
    """Query-unaware extractive baseline: the first ``n`` sentences."""

    def __init__(self, n_sentences: int = 3):
        self.n_sentences = n_sentences

    def __call__(self, context: str, query: str | None = None) -> str:
        return " ".join(segment_sentences(context)[:self.n_sentences])


class CommandSummarizer:
    """Delegate to an external program.

    The program receives ``{"context": ..., "query": ...}`` as JSON on stdin
    and must print the summary on stdout.
    """

    def __init__(self, argv: Sequence[str], timeout: float = 120.0):
        self.argv = list(argv)
        self.timeout = timeout

    def __call__(self, context: str, query: str | None = None) -> str:
        try:
            proc = subprocess.run(self.argv, input=json.dumps({"context": context, "query": query}),
                                  capture_output=True, text=True, timeout=self.timeout, check=True)
        except (OSError, subprocess.SubprocessError) as exc:
            raise ProviderError(f"summarizer {self.argv[0]!r} failed: {exc}") from exc
        return proc.stdout.strip()


DEFAULT_SUMMARIZERS: dict[str, Summarizer] = {"lead3": LeadSummarizer(3)}


@dataclass
class EvalSetup:
    store: VectorStore
    llm: CompletionProvider
    reducer: Reducer
    agent: RLAgent | None = None
    n_chunks: int = 4
    summarizers: Mapping[str, Summarizer] = field(default_factory=lambda: dict(DEFAULT_SUMMARIZERS))


@dataclass
class EvalRecord:
    query_id: str
    method: str
    answer: str
    rouge1: RougeScore
    rouge2: RougeScore
    rougeL: RougeScore
    completion: CompletionRecord
    tau: float
    theta: float | None = None
    savings_vs_original: float | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id, "method": self.method, "answer": self.answer,
            "rouge1": self.rouge1.to_dict(), "rouge2": self.rouge2.to_dict(),
            "rougeL": self.rougeL.to_dict(), "tokens": self.completion.to_dict(),
            "tau": self.tau, "theta": self.theta,
            "savings_vs_original": self.savings_vs_original, "error": self.error,
        }


@dataclass
class _Reduction:
    text: str
    summary_tokens: int = 0
    theta: float | None = None


def _agent_theta(setup: EvalSetup, context: Context, query: str) -> float:
    if setup.agent is None:
        raise InvalidConfig("adaptive_k needs a trained agent")
    emb = setup.reducer.embedder
    return policy(setup.agent, setup.agent.state(emb.embed(context.text), emb.embed(query)))


def _reduce(config: MethodConfig, context: Context, query: str, setup: EvalSetup) -> _Reduction:
    red = setup.reducer
    m = config.method
    if m == "original":
        return _Reduction(context.text)
    if m == "fixed_k":
        return _Reduction(red.reduce(context, query, config.theta).text, theta=config.theta)
    if m == "adaptive_k":
        theta = _agent_theta(setup, context, query)
        return _Reduction(red.reduce(context, query, theta).text, theta=theta)
    if m == "sc_only":
        return _Reduction(stitch(context, [], config.rate, red.provider, red.tokenizer).text)
    if m in ("cqsumdp", "semantic_compression"):
        prompt = render_prompt(m, context.text, query if m == "cqsumdp" else None)
        rec = setup.llm.complete(prompt)
        return _Reduction(rec.answer, rec.prompt_tokens + rec.completion_tokens)
    if m == "external":
        try:
            summarize = setup.summarizers[config.summarizer]
        except KeyError:
            raise InvalidConfig(f"no summarizer registered as {config.summarizer!r}") from None
        return _Reduction(summarize(context.text, query))
    # cascade: query-aware top-k block in original order, then the base method's text
    theta = _agent_theta(setup, context, query) if config.k_mode == "rl" else config.k_mode
    n = len(context.sentences)
    kept = select_top_k(red.rank(context, query), theta, n) if top_k_count(theta, n) else []
    base = _reduce(config.base, context, query, setup)
    block = " ".join(context.sentences[i] for i in kept)
    text = "\n\n".join(p for p in (block, base.text) if p)
    return _Reduction(text, base.summary_tokens, theta)


def _empty_record(config: MethodConfig, pair: QAPair, error: str) -> EvalRecord:
    zero = RougeScore(0.0, 0.0, 0.0)
    return EvalRecord(pair.query_id, config.name, "", zero, zero, zero,
                      CompletionRecord(0, 0, ""), 0.0, error=error)


def run_method(config: MethodConfig, pair: QAPair, setup: EvalSetup,
               context: Context | None = None) -> EvalRecord:
    """Reduce, answer and score one query with one method.

    Provider and configuration failures are captured in ``record.error``
    rather than raised.
    """
    try:
        if context is None:
            context = build_context(setup.store, pair.question, setup.n_chunks,
                                    query_id=pair.query_id)
        reduction = _reduce(config, context, pair.question, setup)
        rec = setup.llm.complete(render_prompt("qa", reduction.text, pair.question))
    except LeanCtxError as exc:
        log.warning("%s on %s failed: %s", config.name, pair.query_id, exc)
        return _empty_record(config, pair, f"{type(exc).__name__}: {exc}")
    rec.summary_tokens = reduction.summary_tokens
    tok = setup.reducer.tokenizer
    full = tok.count(context.text)
    tau = tok.count(reduction.text) / full if full else 1.0
    ref = pair.reference_answer
    return EvalRecord(
        pair.query_id, config.name, rec.answer,
        rouge_n(rec.answer, ref, 1, tok), rouge_n(rec.answer, ref, 2, tok),
        rouge_l(rec.answer, ref, tok), rec, tau, reduction.theta,
        savings_vs_original=0.0 if config.method == "original" else None,
    )


def round_half_up(x: float, places: int = 0) -> float:
    q = Decimal(1).scaleb(-places)
    out = Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP)
    return int(out) if places == 0 else float(out)


def _mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs) if xs else 0.0


def _aggregate(name: str, records: Sequence[EvalRecord], baseline_total: float | None) -> dict:
    ok = [r for r in records if r.error is None]
    means = {
        "prompt_tokens": _mean([r.completion.prompt_tokens for r in ok]),
        "summary_tokens": _mean([r.completion.summary_tokens for r in ok]),
        "completion_tokens": _mean([r.completion.completion_tokens for r in ok]),
        "total_tokens": _mean([r.completion.total_tokens for r in ok]),
        "rouge1": _mean([r.rouge1.f1 for r in ok]),
        "rouge2": _mean([r.rouge2.f1 for r in ok]),
        "rougeL": _mean([r.rougeL.f1 for r in ok]),
        "tau": _mean([r.tau for r in ok]),
    }
    savings = (cost_savings(baseline_total, means["total_tokens"])
               if baseline_total and ok else None)
    row = {"method": name, "queries": len(ok), "errors": len(records) - len(ok), "means": means}
    for k in ("total_tokens", "prompt_tokens", "summary_tokens", "completion_tokens"):
        row[k] = round_half_up(means[k])
    for k in ("rouge1", "rouge2", "rougeL", "tau"):
        row[k] = round_half_up(means[k], 4)
    row["cost_savings"] = savings
    return row


def run_experiment(dataset: Sequence[QAPair], configs: Sequence[MethodConfig], setup: EvalSetup,
                   *, workers: int = 1) -> dict:
    """Evaluate every method on every query against the ``original`` baseline.

    Each query's context is built once and shared by all methods. Queries
    may run on ``workers`` threads; the result does not depend on
    completion order.
    """
    if not dataset:
        raise InvalidConfig("dataset is empty")
    if not configs:
        raise InvalidConfig("no methods to evaluate")
    configs = list(configs)
    if not any(c.method == "original" for c in configs):
        configs.insert(0, MethodConfig("original"))
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise InvalidConfig(f"duplicate methods in {names}")

    def one(pair: QAPair) -> list[EvalRecord]:
        try:
            context = build_context(setup.store, pair.question, setup.n_chunks,
                                    query_id=pair.query_id)
        except LeanCtxError as exc:
            return [_empty_record(c, pair, f"{type(exc).__name__}: {exc}") for c in configs]
        recs = [run_method(c, pair, setup, context) for c in configs]
        base = next(r for r, c in zip(recs, configs) if c.method == "original")
        for r in recs:
            if r.error is None and base.error is None and base.completion.total_tokens:
                r.savings_vs_original = cost_savings(base.completion.total_tokens,
                                                     r.completion.total_tokens)
        return recs

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_query = list(pool.map(one, dataset))
    else:
        per_query = [one(p) for p in dataset]

    by_method = {n: [recs[i] for recs in per_query] for i, n in enumerate(names)}
    base_name = next(c.name for c in configs if c.method == "original")
    base_row = _aggregate(base_name, by_method[base_name], None)
    base_total = base_row["means"]["total_tokens"]
    rows = [_aggregate(n, by_method[n], base_total) for n in names]
    return {
        "n_queries": len(dataset),
        "n_chunks": setup.n_chunks,
        "methods": rows,
        "records": [r.to_dict() for recs in per_query for r in recs],
    }


_COLUMNS = (
    ("Method", "method", "{}"),
    ("Avg Total", "total_tokens", "{}"),
    ("Avg Prompt", "prompt_tokens", "{}"),
    ("Avg Summary", "summary_tokens", "{}"),
    ("Avg Completion", "completion_tokens", "{}"),
    ("ROUGE-1", "rouge1", "{:.4f}"),
    ("ROUGE-2", "rouge2", "{:.4f}"),
    ("ROUGE-L", "rougeL", "{:.4f}"),
    ("Cost Savings (%)", "cost_savings", "{:.2f}"),
)


def format_table(report: dict) -> str:
    """Aligned plain-text rendering of ``report["methods"]``."""
    rows = [[h for h, _, _ in _COLUMNS]]
    for row in report["methods"]:
        rows.append(["-" if row[k] is None else fmt.format(row[k]) for _, k, fmt in _COLUMNS])
    widths = [max(len(r[i]) for r in rows) for i in range(len(_COLUMNS))]
    lines = []
    for j, r in enumerate(rows):
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
        if j == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
