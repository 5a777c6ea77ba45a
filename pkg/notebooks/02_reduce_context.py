# %% [markdown]
# # Reduce a context
#
# Keep the sentences most similar to the query and compress everything else.

# %%
from importlib import resources

from leanctx import HashEmbedder, Reducer, UnigramModel, VectorStore
from leanctx.ingest import build_context, load_corpus

data = resources.files("leanctx") / "data"
store = VectorStore(HashEmbedder(64))
store.add_documents(load_corpus(data / "fixture_corpus.jsonl"))
reducer = Reducer(store.embedder, UnigramModel.from_corpus(store.corpus_texts()), rate=0.8)

question = "What is the orbital period of Zephyria in days?"
context = build_context(store, question, 2)

# %% [markdown]
# The threshold sets the share of sentences kept verbatim. A threshold of
# zero compresses the whole context.

# %%
for theta in (0.0, 0.1, 0.2, 0.4):
    out = reducer.reduce(context, question, theta)
    print(f"theta={theta:.2f} kept={len(out.kept_indices):2d} tau={out.tau:.3f}")

# %%
out = reducer.reduce(context, question, 0.1)
print(out.text)
