# %% [markdown]
# # Compare reduction methods
#
# Evaluate several reduction methods on the fixture test questions. The
# table reports tokens, ROUGE and savings against the unreduced context.

# %%
from importlib import resources

from leanctx import HashEmbedder, MockLLM, Reducer, UnigramModel, VectorStore
from leanctx.adaptive import RLAgent, TrainingSample, train
from leanctx.harness import EvalSetup, format_table, load_qa, parse_method, run_experiment
from leanctx.ingest import build_context, load_corpus

data = resources.files("leanctx") / "data"
store = VectorStore(HashEmbedder(64))
store.add_documents(load_corpus(data / "fixture_corpus.jsonl"))
reducer = Reducer(store.embedder, UnigramModel.from_corpus(store.corpus_texts()))

train_pairs = load_qa(data / "fixture_qa_train.jsonl")
agent = RLAgent(None)
train(agent, [TrainingSample(p.question, p.reference_answer, build_context(store, p.question, 2))
              for p in train_pairs], MockLLM(), reducer, m=8, seed=0)

# %%
methods = ["original", "fixed_k:0.1", "fixed_k:0.2", "sc_only:0.5", "adaptive_k",
           "cqsumdp", "external:lead3", "cascade:external:lead3@rl"]
setup = EvalSetup(store, MockLLM(), reducer, agent, n_chunks=2)
report = run_experiment(load_qa(data / "fixture_qa_test.jsonl"),
                        [parse_method(m) for m in methods], setup)
print(format_table(report))
