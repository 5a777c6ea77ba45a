"""``leanctx`` command line: ingest, train, ask, eval.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import adaptive
from .adaptive import DEFAULT_THRESHOLDS, RLAgent, TrainingSample, load_agent, save_agent
from .errors import InvalidConfig, InvalidThreshold, LeanCtxError, TrainingAborted
from .harness import (DEFAULT_SUMMARIZERS, METHOD_NAMES, CommandSummarizer, EvalSetup,
                      format_table, load_qa, parse_method, run_experiment)
from .ingest import HashEmbedder, HTTPEmbedder, StoreConfig, VectorStore, build_context, load_corpus
from .llm import MockLLM, OpenAICompatibleClient
from .reducer import Reducer, UnigramModel

log = logging.getLogger("leanctx")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class EmbedderConfig:
    kind: str = "hash"
    dimension: int = 64
    base_url: str | None = None
    model: str | None = None
    timeout: float = 60.0


@dataclass
class LLMConfig:
    kind: str = "mock"
    base_url: str | None = None
    model: str | None = None
    timeout: float = 60.0
    max_concurrent: int = 4
    max_retries: int = 3


@dataclass
class ReducerConfig:
    rate: float = 0.8


@dataclass
class RLConfig:
    thresholds: list = field(default_factory=lambda: list(DEFAULT_THRESHOLDS))
    m: int = 8
    alpha: float = 0.5
    seed: int = 0
    variant: str = "subtract"
    reference: str = "ground_truth"


@dataclass
class RetrievalConfig:
    n_chunks: int = 4


@dataclass
class EvalConfig:
    workers: int = 1


@dataclass
class AppConfig:
    store: StoreConfig = field(default_factory=StoreConfig)
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    llm: LLMConfig = field(default_factory=LLMConfig)
    reducer: ReducerConfig = field(default_factory=ReducerConfig)
    rl: RLConfig = field(default_factory=RLConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    summarizers: dict = field(default_factory=dict)


_SECTIONS = {f.name: f.default_factory for f in fields(AppConfig)}


def _section(cls, raw, where):
    if not isinstance(raw, dict):
        raise InvalidConfig(f"{where}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise InvalidConfig(f"{where}: unknown key(s) {unknown}")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise InvalidConfig(f"{where}: {exc}") from exc


def load_config(path: str | None) -> AppConfig:
    """Read and validate a JSON config; missing sections take defaults."""
    if path is None:
        return AppConfig()
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise InvalidConfig(f"{path}: expected an object")
    unknown = sorted(set(raw) - set(_SECTIONS))
    if unknown:
        raise InvalidConfig(f"{path}: unknown section(s) {unknown}")
    cfg = AppConfig()
    for name, value in raw.items():
        if name == "summarizers":
            if not isinstance(value, dict) or not all(
                    isinstance(v, dict) and set(v) == {"command"} and isinstance(v["command"], list)
                    for v in value.values()):
                raise InvalidConfig("summarizers: expected {name: {\"command\": [argv...]}}")
            cfg.summarizers = value
        else:
            setattr(cfg, name, _section(type(getattr(cfg, name)), value, name))
    _validate(cfg)
    return cfg


def _validate(cfg: AppConfig) -> None:
    if cfg.embedder.kind not in ("hash", "http"):
        raise InvalidConfig("embedder.kind must be 'hash' or 'http'")
    if cfg.llm.kind not in ("mock", "http"):
        raise InvalidConfig("llm.kind must be 'mock' or 'http'")
    for section in (cfg.embedder, cfg.llm):
        if section.kind == "http" and not (section.base_url and section.model):
            raise InvalidConfig("http backends need base_url and model")
    if cfg.embedder.dimension <= 0:
        raise InvalidConfig("embedder.dimension must be positive")
    if not 0 <= cfg.reducer.rate < 1:
        raise InvalidConfig("reducer.rate must be in [0, 1)")
    if cfg.rl.m < 1:
        raise InvalidConfig("rl.m must be >= 1")
    if cfg.rl.variant not in adaptive.VARIANTS:
        raise InvalidConfig(f"rl.variant must be one of {adaptive.VARIANTS}")
    if cfg.rl.reference not in ("ground_truth", "full_context"):
        raise InvalidConfig("rl.reference must be 'ground_truth' or 'full_context'")
    RLAgent(None, tuple(cfg.rl.thresholds), cfg.rl.alpha)
    if cfg.retrieval.n_chunks < 1:
        raise InvalidConfig("retrieval.n_chunks must be >= 1")
    if cfg.eval.workers < 1:
        raise InvalidConfig("eval.workers must be >= 1")


def make_embedder(cfg: AppConfig):
    e = cfg.embedder
    if e.kind == "hash":
        return HashEmbedder(e.dimension)
    client = OpenAICompatibleClient(e.base_url, e.model, embedding_model=e.model, timeout=e.timeout)
    return HTTPEmbedder(client, e.dimension)


def make_llm(cfg: AppConfig):
    c = cfg.llm
    if c.kind == "mock":
        return MockLLM()
    return OpenAICompatibleClient(c.base_url, c.model, timeout=c.timeout,
                                  max_concurrent=c.max_concurrent, max_retries=c.max_retries)


def _load_store(path: str, cfg: AppConfig) -> VectorStore:
    return VectorStore.load(path, make_embedder(cfg))


def _reducer(store: VectorStore, cfg: AppConfig) -> Reducer:
    return Reducer(store.embedder, UnigramModel.from_corpus(store.corpus_texts()),
                   store.tokenizer, cfg.reducer.rate)


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2) + "\n")


def cmd_ingest(args, cfg: AppConfig) -> int:
    docs = load_corpus(args.corpus)
    store = VectorStore(make_embedder(cfg), cfg.store)
    store.add_documents(docs)
    store.save(args.store)
    _emit({"documents": len(docs), "chunks": len(store), "store": str(args.store)})
    return EXIT_OK


def _n_chunks(args, cfg: AppConfig) -> int:
    return args.n_chunks if args.n_chunks is not None else cfg.retrieval.n_chunks


def cmd_train(args, cfg: AppConfig) -> int:
    store = _load_store(args.store, cfg)
    pairs = load_qa(args.qa)
    if not pairs:
        raise LeanCtxError(f"{args.qa}: no training pairs")
    n = _n_chunks(args, cfg)
    samples = [TrainingSample(p.question, p.reference_answer,
                              build_context(store, p.question, n, query_id=p.query_id))
               for p in pairs]
    seed = args.seed if args.seed is not None else cfg.rl.seed
    agent = RLAgent(None, tuple(cfg.rl.thresholds), cfg.rl.alpha, variant=cfg.rl.variant)
    llm = make_llm(cfg)
    try:
        report = adaptive.train(agent, samples, llm, _reducer(store, cfg), m=cfg.rl.m, seed=seed,
                                reference=cfg.rl.reference)
    except TrainingAborted as exc:
        _emit({"error": str(exc), "partial": exc.progress})
        return EXIT_RUNTIME
    save_agent(agent, args.agent)
    _emit(dict(report.to_dict(), agent=str(args.agent), states=agent.state_model.m))
    return EXIT_OK


def cmd_ask(args, cfg: AppConfig) -> int:
    store = _load_store(args.store, cfg)
    agent = load_agent(args.agent)
    context = build_context(store, args.question, _n_chunks(args, cfg))
    res = adaptive.infer(agent, args.question, context, make_llm(cfg), _reducer(store, cfg))
    _emit({
        "answer": res.answer,
        "theta": res.theta,
        "state": res.state,
        "kept_sentences": len(res.reduced.kept_indices),
        "context_sentences": len(context.sentences),
        "original_tokens": res.reduced.original_tokens,
        "reduced_tokens": res.reduced.reduced_tokens,
        "tau": res.reduced.tau,
        "tokens": res.completion.to_dict(),
    })
    return EXIT_OK


def _parse_methods(csv: str):
    try:
        return [parse_method(s) for s in csv.split(",") if s.strip()]
    except (InvalidConfig, InvalidThreshold) as exc:
        raise UsageError(f"{exc}\nvalid methods: original, fixed_k:<theta>, adaptive_k, "
                         "sc_only:<rate>, cqsumdp, semantic_compression, external:<name>, "
                         "cascade:<base>@<theta|rl>") from exc


def report_paths(report: str) -> tuple[Path, Path]:
    p = Path(report)
    return p, (p.with_suffix(".txt") if p.suffix == ".json" else Path(f"{p}.txt"))


def cmd_eval(args, cfg: AppConfig) -> int:
    configs = _parse_methods(args.methods)
    if not configs:
        raise UsageError("no methods given")
    store = _load_store(args.store, cfg)
    agent = None
    if any(c.needs_agent for c in configs):
        if not args.agent:
            raise UsageError("adaptive methods need --agent")
        agent = load_agent(args.agent)
    summarizers = dict(DEFAULT_SUMMARIZERS)
    summarizers.update({k: CommandSummarizer(v["command"]) for k, v in cfg.summarizers.items()})
    setup = EvalSetup(store, make_llm(cfg), _reducer(store, cfg), agent, _n_chunks(args, cfg),
                      summarizers)
    report = run_experiment(load_qa(args.qa), configs, setup, workers=cfg.eval.workers)
    json_path, txt_path = report_paths(args.report)
    json_path.write_text(json.dumps(report, indent=1) + "\n", encoding="utf-8")
    table = format_table(report)
    txt_path.write_text(table, encoding="utf-8")
    sys.stdout.write(table)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--store", required=True, help="vector store snapshot (JSON)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="leanctx", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="chunk, embed and store a JSONL corpus")
    p.add_argument("corpus", help="JSONL with doc_id and text")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", parents=[common], help="train the adaptive-k agent")
    p.add_argument("qa", help="JSONL training QA pairs")
    p.add_argument("--agent", required=True, help="output agent file")
    p.add_argument("--n-chunks", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("ask", parents=[common], help="answer one question with a trained agent")
    p.add_argument("question")
    p.add_argument("--agent", required=True)
    p.add_argument("--n-chunks", type=int)
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("eval", parents=[common], help="compare reduction methods on a QA set")
    p.add_argument("qa", help="JSONL test QA pairs")
    p.add_argument("--methods", default="original,fixed_k:0.1",
                   help=f"comma-separated; kinds: {', '.join(METHOD_NAMES)}")
    p.add_argument("--report", required=True, help="report path (.json; .txt written alongside)")
    p.add_argument("--agent")
    p.add_argument("--n-chunks", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "n_chunks", None) is not None and args.n_chunks < 1:
        parser.error("--n-chunks must be >= 1")
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except (UsageError, InvalidConfig, InvalidThreshold) as exc:
        print(f"leanctx: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"leanctx: error: no such file: {exc.filename}", file=sys.stderr)
        return EXIT_RUNTIME
    except (LeanCtxError, OSError) as exc:
        print(f"leanctx: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
