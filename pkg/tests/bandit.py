"""Engineered environment where threshold 0.2 maximises reward in every state.

Each context has 20 sentences; the four query "key" sentences are the most
query-similar ones, so top-k holds all of them exactly when k >= 4, i.e.
theta >= 0.2. The scripted LLM returns the reference answer only when every
key sentence survives verbatim, otherwise "No answer". Larger thresholds
get the same accuracy at a higher token ratio.
"""

import threading

from leanctx.ingest import Context
from leanctx.llm import NO_ANSWER, CompletionRecord, parse_prompt
from leanctx.text import DEFAULT_TOKENIZER

TOPICS = ["copper", "violet", "harbor", "glacier", "meadow", "lantern", "orchid", "falcon"]
FILLER = ("mild gray pebbles drift slowly along quiet northern shores near old wooden piers "
          "while distant bells ring softly over calm evening water").split()


def make_sample(topic_idx, variant, rng):
    topic = TOPICS[topic_idx]
    query = f"{topic} {topic} facts"
    keys = [f"{topic.capitalize()} {topic} facts {w}." for w in ("one", "two", "three", "four")]
    fillers = []
    for _ in range(16):
        words = list(rng.choice(FILLER, size=8, replace=False))
        words[0] = words[0].capitalize()
        fillers.append(" ".join(words) + ".")
    sentences = fillers[:]
    for j, k in enumerate(keys):
        sentences.insert(2 + 4 * j + variant % 2, k)
    answer = f"The {topic} answer."
    return query, answer, Context(f"{topic}-{variant}", sentences), keys


class ScriptedLLM:
    def __init__(self, keys_by_query, answers):
        self.keys_by_query = keys_by_query
        self.answers = answers
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, prompt):
        _, context, query = parse_prompt(prompt)
        hit = all(k in context for k in self.keys_by_query[query])
        answer = self.answers[query] if hit else NO_ANSWER
        with self._lock:
            self.calls += 1
        return CompletionRecord(DEFAULT_TOKENIZER.count(prompt), DEFAULT_TOKENIZER.count(answer),
                                answer)


def build(rng, n_states=8, per_state=20):
    samples, keys, answers = [], {}, {}
    from leanctx.adaptive import TrainingSample
    for t in range(n_states):
        for v in range(per_state):
            query, answer, ctx, ks = make_sample(t, v, rng)
            keys[query], answers[query] = ks, answer
            samples.append(TrainingSample(query, answer, ctx))
    return samples, ScriptedLLM(keys, answers)
