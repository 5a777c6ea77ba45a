from importlib import resources

import numpy as np
import pytest

from leanctx import HashEmbedder, MockLLM, Reducer, UnigramModel, VectorStore
from leanctx.ingest import Context, load_corpus

DATA = resources.files("leanctx") / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def fixture_store():
    store = VectorStore(HashEmbedder(64))
    store.add_documents(load_corpus(DATA / "fixture_corpus.jsonl"))
    return store


@pytest.fixture
def reducer(fixture_store):
    return Reducer(fixture_store.embedder, UnigramModel.from_corpus(fixture_store.corpus_texts()))


@pytest.fixture
def mock_llm():
    return MockLLM()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


WORDS = ("alpha beta gamma delta epsilon zeta eta theta iota kappa lambda mu nu xi omicron "
         "pi rho sigma tau upsilon phi chi psi omega river stone cloud lamp").split()


def random_sentence(rng, lo=3, hi=12):
    n = int(rng.integers(lo, hi + 1))
    words = [WORDS[i] for i in rng.integers(0, len(WORDS), n)]
    words[0] = words[0].capitalize()
    if rng.random() < 0.3:
        words.insert(int(rng.integers(1, n + 1)), ",")
    return " ".join(words).replace(" ,", ",") + rng.choice([".", "!", "?"])


def random_context(rng, lo=5, hi=30):
    n = int(rng.integers(lo, hi + 1))
    return Context("q", [random_sentence(rng) for _ in range(n)])
