"""Query-aware context reduction for retrieval-augmented QA.

Keep the top-k query-relevant context sentences verbatim, compress the
rest, and let a tabular Q-learning agent pick k per query.
"""

from .adaptive import (DEFAULT_THRESHOLDS, QTable, RLAgent, StateModel, TrainingSample,
                       compute_reward, fit_states, get_state, infer, load_agent, policy,
                       save_agent, state_vector, train, update_q)
from .harness import (EvalSetup, MethodConfig, QAPair, parse_method, run_experiment,
                      run_method)
from .ingest import (Chunk, Context, Document, HashEmbedder, StoreConfig, VectorStore,
                     build_context, embed_text, retrieve_top_n, split_document)
from .llm import (CompletionRecord, CostModel, MockLLM, OpenAICompatibleClient, cost,
                  cost_savings, render_prompt)
from .reducer import (RankedSentence, ReducedContext, Reducer, UnigramModel, rank_sentences,
                      reduce_fragment, select_top_k, stitch)
from .rouge import RougeScore, rouge_l, rouge_n
from .text import RegexTokenizer, count_tokens, segment_sentences

__version__ = "0.1.0"
