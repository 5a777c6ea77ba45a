# %% [markdown]
# # Ingest a corpus and retrieve chunks
#
# Load the bundled fixture corpus, split it into chunks, embed them with the
# hashing embedder and look up the chunks closest to a question.

# %%
from importlib import resources

from leanctx import HashEmbedder, VectorStore
from leanctx.ingest import StoreConfig, build_context, load_corpus, retrieve_top_n

data = resources.files("leanctx") / "data"
docs = load_corpus(data / "fixture_corpus.jsonl")
store = VectorStore(HashEmbedder(64), StoreConfig(chunk_size=500))
store.add_documents(docs)
print(len(docs), "documents ->", len(store), "chunks")

# %% [markdown]
# Retrieval ranks chunks by cosine similarity. Embeddings are unit length,
# so a dot product is enough.

# %%
question = "What is the orbital period of Zephyria in days?"
for chunk in retrieve_top_n(store, store.embedder.embed(question), 3):
    print(chunk.chunk_id, round(float(chunk.embedding @ store.embedder.embed(question)), 3))

# %% [markdown]
# `build_context` puts the retrieved chunks back in document order and splits
# them into sentences. That sentence list is what the reducer works on.

# %%
context = build_context(store, question, 2)
print(len(context.sentences), "sentences")
print(context.sentences[:3])
