# %% [markdown]
# # Train the adaptive threshold agent
#
# The agent clusters context/query embedding differences into states. It
# then tries every threshold on every training sample and keeps the
# running mean reward per state and threshold.

# %%
from importlib import resources

from leanctx import HashEmbedder, MockLLM, Reducer, UnigramModel, VectorStore
from leanctx.adaptive import RLAgent, TrainingSample, policy, train
from leanctx.harness import load_qa
from leanctx.ingest import build_context, load_corpus

data = resources.files("leanctx") / "data"
store = VectorStore(HashEmbedder(64))
store.add_documents(load_corpus(data / "fixture_corpus.jsonl"))
reducer = Reducer(store.embedder, UnigramModel.from_corpus(store.corpus_texts()))

pairs = load_qa(data / "fixture_qa_train.jsonl")
samples = [TrainingSample(p.question, p.reference_answer, build_context(store, p.question, 2))
           for p in pairs]

# %%
agent = RLAgent(None, alpha=0.5)
llm = MockLLM()
report = train(agent, samples, llm, reducer, m=8, seed=0)
print("LLM calls:", llm.calls)

# %% [markdown]
# Greedy threshold for every state seen during training.

# %%
for s in range(agent.state_model.m):
    if agent.q.counts[s].sum():
        print(s, policy(agent, s), agent.q.values[s].round(3))
