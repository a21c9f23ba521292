"""Event retrieval for a value theme: cosine ranking plus baseline strategies."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .embeddings import EmbeddingProvider, EmbeddingVector, embed_text
from .errors import ContractError, PreconditionError
from .events import Event, EventPool
from .survey import Question
from .taxonomy import ValueDimension

STRATEGY_VALUE = "value"
STRATEGY_RANDOM = "random"
STRATEGY_DIRECT = "direct"
STRATEGIES = (STRATEGY_VALUE, STRATEGY_RANDOM, STRATEGY_DIRECT)


@dataclass(frozen=True)
class RetrievalResult:
    strategy: str
    query_text: str
    dimension: ValueDimension | None
    ranked: tuple[tuple[str, float], ...]

    def event_ids(self) -> tuple[str, ...]:
        return tuple(eid for eid, _ in self.ranked)


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine of the angle between two vectors, computed in double precision."""
    if a.dim != b.dim:
        raise ContractError(f"dimension mismatch: {a.dim} != {b.dim}")
    if a.provider_tag != b.provider_tag:
        raise ContractError(
            f"cannot compare vectors from {a.provider_tag!r} and {b.provider_tag!r}"
        )
    dot = sum(x * y for x, y in zip(a.values, b.values))
    norm_a = math.sqrt(sum(x * x for x in a.values))
    norm_b = math.sqrt(sum(y * y for y in b.values))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return dot / (norm_a * norm_b)


def event_text(event: Event) -> str:
    """Canonical text under which an event is embedded."""
    return f"{event.title}: {event.description}"


def _check_k(pool: EventPool, k: int) -> None:
    if k < 1:
        raise PreconditionError(f"k must be at least 1, got {k}")
    if k > len(pool.events):
        raise PreconditionError(f"k={k} exceeds pool size {len(pool.events)}")


def _rank_by_query(
    query_text: str, pool: EventPool, k: int, provider: EmbeddingProvider
) -> tuple[tuple[str, float], ...]:
    language = pool.country.language
    query = embed_text(query_text, provider, language=language)
    scored = []
    for event in pool.events:
        vec = embed_text(event_text(event), provider, language=language)
        scored.append((event.id, cosine_similarity(query, vec)))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return tuple(scored[:k])


def top_k_events(
    dimension: ValueDimension, pool: EventPool, k: int, provider: EmbeddingProvider
) -> RetrievalResult:
    """The k events most similar to the value theme's name, ties by event id."""
    _check_k(pool, k)
    ranked = _rank_by_query(dimension.name, pool, k, provider)
    return RetrievalResult(
        strategy=STRATEGY_VALUE, query_text=dimension.name, dimension=dimension, ranked=ranked
    )


def random_k_events(pool: EventPool, k: int, seed: int | str) -> RetrievalResult:
    """Baseline: a seeded uniform sample, reported in event-id order with 0 scores."""
    _check_k(pool, k)
    rng = random.Random(seed)
    picked = rng.sample(pool.events, k)
    ranked = tuple((e.id, 0.0) for e in sorted(picked, key=lambda e: e.id))
    return RetrievalResult(strategy=STRATEGY_RANDOM, query_text="", dimension=None, ranked=ranked)


def direct_match_events(
    question: Question, pool: EventPool, k: int, provider: EmbeddingProvider
) -> RetrievalResult:
    """Baseline: rank events against the question text instead of its theme."""
    _check_k(pool, k)
    ranked = _rank_by_query(question.text, pool, k, provider)
    return RetrievalResult(
        strategy=STRATEGY_DIRECT, query_text=question.text, dimension=None, ranked=ranked
    )


def retrieval_to_dict(result: RetrievalResult) -> dict:
    """JSON form; similarity scores are fixed to 6 decimal places."""
    return {
        "strategy": result.strategy,
        "query_text": result.query_text,
        "dimension": None if result.dimension is None else result.dimension.name,
        "ranked": [
            {"event_id": eid, "score": f"{score:.6f}"} for eid, score in result.ranked
        ],
    }
