"""Adaptive top-k selection with tabular Q-learning.

The agent treats each (query, context) pair as a one-step contextual
bandit. States are K-means centroids over an embedding-derived state vector,
actions are top-k thresholds, and the Q-table stores the running mean reward
of every (state, action) cell.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (CorruptAgentFile, DimensionMismatch, InsufficientSamples, InvalidConfig,
                     InvalidIndex, InvalidReward, ProviderError, TrainingAborted)
from .ingest import Context, Embedder
from .llm import CompletionProvider, CompletionRecord, render_prompt
from .reducer import MAX_THRESHOLD, Reducer, ReducedContext
from .rouge import rouge_n

__all__ = [
    "VARIANTS", "DEFAULT_THRESHOLDS", "StateModel", "QTable", "RLAgent", "TrainingSample",
    "TrainingReport", "Inference", "state_vector", "kmeans", "fit_states", "get_state",
    "compute_reward", "update_q", "policy", "train", "infer", "save_agent", "load_agent",
]

log = logging.getLogger(__name__)

VARIANTS = ("subtract", "concat", "cosine")
DEFAULT_THRESHOLDS = tuple(round(0.05 * i, 2) for i in range(9))


def state_vector(v_c: np.ndarray, v_q: np.ndarray, variant: str = "subtract") -> np.ndarray:
    v_c = np.asarray(v_c, dtype=float)
    v_q = np.asarray(v_q, dtype=float)
    if v_c.shape != v_q.shape or v_c.ndim != 1:
        raise DimensionMismatch(f"context {v_c.shape} vs query {v_q.shape}")
    if variant == "subtract":
        return v_c - v_q
    if variant == "concat":
        return np.concatenate([v_c, v_q])
    if variant == "cosine":
        denom = np.linalg.norm(v_c) * np.linalg.norm(v_q)
        return np.array([float(v_c @ v_q / denom) if denom else 0.0])
    raise InvalidConfig(f"unknown state variant {variant!r}; expected one of {VARIANTS}")


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


@dataclass
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    objective: list[float]
    n_iter: int


def kmeans(samples: np.ndarray, m: int, seed: int = 0, max_iter: int = 100) -> KMeansResult:
    """Lloyd's algorithm from seeded farthest-point initialisation.

    The first centroid is a sample drawn with ``seed``; each further one is
    the sample farthest from its nearest chosen centroid (lowest index on
    ties). Iterates until assignments stop changing or ``max_iter``.
    ``objective`` holds the within-cluster sum of squares after every
    update step. Empty clusters keep their previous centroid.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("samples must be a 2-D array")
    n = len(X)
    if m < 1:
        raise InvalidConfig("cluster count must be >= 1")
    if n < m:
        raise InsufficientSamples(f"{n} samples for {m} clusters")
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    nearest = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, m):
        nxt = int(np.argmax(nearest))
        chosen.append(nxt)
        nearest = np.minimum(nearest, ((X - X[nxt]) ** 2).sum(axis=1))
    centroids = X[chosen].copy()

    labels = np.full(n, -1)
    objective: list[float] = []
    it = 0
    for it in range(1, max_iter + 1):
        new_labels = np.argmin(_sq_dists(X, centroids), axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(m):
            members = X[labels == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
        objective.append(float(((X - centroids[labels]) ** 2).sum()))
    return KMeansResult(centroids, labels, objective, it)


@dataclass
class StateModel:
    variant: str
    centroids: np.ndarray
    objective: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidConfig(f"unknown state variant {self.variant!r}")
        self.centroids = np.atleast_2d(np.asarray(self.centroids, dtype=float))
        if len(self.centroids) < 1:
            raise InvalidConfig("a state model needs at least one centroid")

    @property
    def m(self) -> int:
        return len(self.centroids)

    @property
    def dimension(self) -> int:
        return self.centroids.shape[1]

    def assign(self, vec: np.ndarray) -> int:
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.dimension,):
            raise DimensionMismatch(f"state vector {vec.shape} vs centroids ({self.dimension},)")
        return int(np.argmin(((self.centroids - vec) ** 2).sum(axis=1)))


def fit_states(samples: Sequence[np.ndarray], m: int, seed: int = 0, variant: str = "subtract",
               max_iter: int = 100) -> StateModel:
    if len(samples) < m:
        raise InsufficientSamples(f"{len(samples)} samples for {m} clusters")
    res = kmeans(np.vstack(samples), m, seed=seed, max_iter=max_iter)
    return StateModel(variant, res.centroids, res.objective)


def get_state(model: StateModel, v_c: np.ndarray, v_q: np.ndarray) -> int:
    """Index of the centroid nearest to the pair's state vector (lowest on ties)."""
    return model.assign(state_vector(v_c, v_q, model.variant))


def compute_reward(r: float, r_star: float, tau: float, alpha: float) -> float:
    """``alpha * (2r - r*) - (1 - alpha) * tau``."""
    for name, val in (("r", r), ("r_star", r_star), ("tau", tau), ("alpha", alpha)):
        if not 0.0 <= val <= 1.0:
            raise InvalidReward(f"{name}={val} outside [0, 1]")
    return alpha * (2 * r - r_star) - (1 - alpha) * tau


@dataclass
class QTable:
    values: np.ndarray
    counts: np.ndarray

    @classmethod
    def zeros(cls, m: int, n_actions: int) -> "QTable":
        return cls(np.zeros((m, n_actions)), np.zeros((m, n_actions), dtype=np.int64))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def update_q(q: QTable, s: int, a: int, reward: float) -> None:
    """Incremental mean: ``Q += (reward - Q) / n`` with ``n`` the new visit count."""
    m, k = q.shape
    if not (0 <= s < m and 0 <= a < k):
        raise InvalidIndex(f"(state={s}, action={a}) outside Q-table of shape {q.shape}")
    q.counts[s, a] += 1
    q.values[s, a] += (reward - q.values[s, a]) / q.counts[s, a]


@dataclass
class RLAgent:
    state_model: StateModel | None
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    alpha: float = 0.5
    q: QTable | None = None
    embedder_dimension: int | None = None
    variant: str = "subtract"

    def __post_init__(self):
        self.thresholds = tuple(float(t) for t in self.thresholds)
        th = self.thresholds
        if len(th) < 2:
            raise InvalidConfig("need at least two thresholds")
        if any(b <= a for a, b in zip(th, th[1:])):
            raise InvalidConfig("thresholds must be strictly increasing")
        if th[0] < 0 or th[-1] > MAX_THRESHOLD + 1e-12:
            raise InvalidConfig(f"thresholds must lie in [0, {MAX_THRESHOLD}]")
        if not 0 <= self.alpha <= 1:
            raise InvalidConfig("alpha must be in [0, 1]")
        if self.state_model is not None:
            self.variant = self.state_model.variant
            if self.q is None:
                self.q = QTable.zeros(self.state_model.m, len(th))
            if self.q.shape != (self.state_model.m, len(th)):
                raise InvalidConfig(f"Q-table shape {self.q.shape} does not match "
                                    f"({self.state_model.m}, {len(th)})")

    @property
    def fitted(self) -> bool:
        return self.state_model is not None

    def state(self, v_c: np.ndarray, v_q: np.ndarray) -> int:
        if self.state_model is None:
            raise InvalidConfig("agent has no state model; fit or train it first")
        if self.embedder_dimension is not None and np.shape(v_q) != (self.embedder_dimension,):
            raise DimensionMismatch(f"embedding {np.shape(v_q)} vs agent dimension "
                                    f"{self.embedder_dimension}")
        return get_state(self.state_model, v_c, v_q)


def policy(agent: RLAgent, state: int) -> float:
    """Greedy threshold for ``state``; ties go to the smallest threshold."""
    row = agent.q.values[state]
    return agent.thresholds[int(np.argmax(row))]


@dataclass
class TrainingSample:
    query: str
    reference_answer: str
    context: Context


@dataclass
class TrainingReport:
    samples: int = 0
    actions: int = 0
    exploration_calls: int = 0
    full_context_calls: int = 0
    updates: int = 0
    visits: list[int] = field(default_factory=list)

    @property
    def llm_calls(self) -> int:
        return self.exploration_calls + self.full_context_calls

    def to_dict(self) -> dict:
        return {"samples": self.samples, "actions": self.actions,
                "exploration_calls": self.exploration_calls,
                "full_context_calls": self.full_context_calls,
                "llm_calls": self.llm_calls, "updates": self.updates,
                "state_visits": self.visits}


def _rouge1_f1(candidate: str, reference: str) -> float:
    return rouge_n(candidate, reference, 1).f1


def _embed_pair(embedder: Embedder, sample: TrainingSample) -> tuple[np.ndarray, np.ndarray]:
    return embedder.embed(sample.context.text), embedder.embed(sample.query)


def train(agent: RLAgent, training_set: Sequence[TrainingSample], llm: CompletionProvider,
          reducer: Reducer, *, m: int = 8, seed: int = 0,
          reference: str = "ground_truth") -> TrainingReport:
    """Full-exploration training.

    If the agent has no state model, one is fitted on the training pairs
    first (``m`` clusters, clipped to the number of samples). Then, for
    every sample, the full-context answer is scored once to get ``r*`` and
    every threshold is tried, scored and folded into the Q-table.

    ``reference`` picks what ``r`` is measured against: ``"ground_truth"``
    (the dataset answer) or ``"full_context"`` (the full-context LLM answer).
    ``r*`` always uses the dataset answer. On a provider failure a
    :class:`TrainingAborted` carrying the partial report is raised; updates
    applied so far stay in the table.
    """
    if not training_set:
        raise InvalidConfig("training set is empty")
    if reference not in ("ground_truth", "full_context"):
        raise InvalidConfig(f"unknown reference mode {reference!r}")
    embedder = reducer.embedder
    pairs = [_embed_pair(embedder, s) for s in training_set]
    if agent.state_model is None:
        vecs = [state_vector(vc, vq, agent.variant) for vc, vq in pairs]
        agent.state_model = fit_states(vecs, min(m, len(vecs)), seed=seed, variant=agent.variant)
        agent.q = QTable.zeros(agent.state_model.m, len(agent.thresholds))
    if agent.q is None:
        agent.q = QTable.zeros(agent.state_model.m, len(agent.thresholds))
    agent.embedder_dimension = embedder.dimension

    report = TrainingReport(actions=len(agent.thresholds), visits=[0] * agent.state_model.m)
    for sample, (v_c, v_q) in zip(training_set, pairs):
        state = agent.state(v_c, v_q)
        try:
            full = llm.complete(render_prompt("qa", sample.context.text, sample.query))
            report.full_context_calls += 1
            r_star = _rouge1_f1(full.answer, sample.reference_answer)
            target = sample.reference_answer if reference == "ground_truth" else full.answer
            for a, theta in enumerate(agent.thresholds):
                reduced = reducer.reduce(sample.context, sample.query, theta)
                rec = llm.complete(render_prompt("qa", reduced.text, sample.query))
                report.exploration_calls += 1
                r = _rouge1_f1(rec.answer, target)
                update_q(agent.q, state, a, compute_reward(r, r_star, reduced.tau, agent.alpha))
                report.updates += 1
                report.visits[state] += 1
        except ProviderError as exc:
            raise TrainingAborted(f"provider failed after {report.samples} samples: {exc}",
                                  report.to_dict()) from exc
        report.samples += 1
    return report


@dataclass
class Inference:
    answer: str
    completion: CompletionRecord
    reduced: ReducedContext
    theta: float
    state: int


def infer(agent: RLAgent, query: str, context: Context, llm: CompletionProvider,
          reducer: Reducer) -> Inference:
    """Reduce ``context`` with the agent's greedy threshold and answer ``query``."""
    v_c = reducer.embedder.embed(context.text)
    v_q = reducer.embedder.embed(query)
    state = agent.state(v_c, v_q)
    theta = policy(agent, state)
    reduced = reducer.reduce(context, query, theta)
    rec = llm.complete(render_prompt("qa", reduced.text, query))
    return Inference(rec.answer, rec, reduced, theta, state)


def agent_to_dict(agent: RLAgent) -> dict:
    if agent.state_model is None or agent.q is None:
        raise InvalidConfig("cannot serialise an unfitted agent")
    return {
        "variant": agent.variant,
        "alpha": agent.alpha,
        "thresholds": list(agent.thresholds),
        "centroids": agent.state_model.centroids.tolist(),
        "q_values": agent.q.values.tolist(),
        "q_counts": agent.q.counts.tolist(),
        "embedder_dimension": agent.embedder_dimension,
    }


def save_agent(agent: RLAgent, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(agent_to_dict(agent), fh, indent=1)
        fh.write("\n")


def agent_from_dict(data: dict) -> RLAgent:
    try:
        model = StateModel(data["variant"], np.array(data["centroids"], dtype=float))
        values = np.array(data["q_values"], dtype=float)
        counts = np.array(data["q_counts"], dtype=np.int64)
        if values.shape != counts.shape or values.ndim != 2:
            raise ValueError("q_values and q_counts must be matching 2-D tables")
        dim = data.get("embedder_dimension")
        return RLAgent(model, tuple(data["thresholds"]), float(data["alpha"]),
                       QTable(values, counts), None if dim is None else int(dim))
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptAgentFile(f"invalid agent data: {exc}") from exc


def load_agent(path: str | os.PathLike) -> RLAgent:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CorruptAgentFile(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise CorruptAgentFile(f"{path}: expected a JSON object")
    return agent_from_dict(data)
