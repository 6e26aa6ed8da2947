"""Mood-congruent retrieval over a memory unit.

Every fragment gets two distances to the query: a semantic one (Euclidean
by default) and an emotional one (1 - cosine of the emotion vectors). A
strategy turns the pair into a final score and the ``k`` smallest win.

Combination strategies (``c-a``, ``c-m``) first min-max normalize each
distance family over the unit. Sequential strategies (``s-s``, ``s-e``)
shortlist ``pool_size`` fragments by one distance and re-rank the shortlist
by the other. Ties always break on ascending fragment id.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .embedding import SemanticVector, embed, semantic_distance
from .emotion import EmotionVector, emotion_distance, score_emotion
from .errors import UncachedVectorError

DEFAULT_K = 10
DEFAULT_WEIGHT = 0.5
MUL_EPSILON = 0.01
POOL_FACTOR = 3


class Variant(str, Enum):
    SEMANTIC_ONLY = "semantic-only"
    COMBINE_ADD = "c-a"
    COMBINE_MUL = "c-m"
    SEQ_SEMANTIC_FIRST = "s-s"
    SEQ_EMOTION_FIRST = "s-e"

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = {
    Variant.SEMANTIC_ONLY: "Ordinary RAG",
    Variant.COMBINE_ADD: "Emotional RAG (C-A)",
    Variant.COMBINE_MUL: "Emotional RAG (C-M)",
    Variant.SEQ_SEMANTIC_FIRST: "Emotional RAG (S-S)",
    Variant.SEQ_EMOTION_FIRST: "Emotional RAG (S-E)",
}


@dataclass(frozen=True)
class RetrievalStrategy:
    variant: Variant = Variant.COMBINE_ADD
    pool_size: int | None = None  # sequential only; None means POOL_FACTOR * k
    weight: float = DEFAULT_WEIGHT  # c-a only: weight of the semantic term
    metric: str = "euclidean"
    normalize: bool = True  # c-a / c-m: fuse min-max normalized distances
    epsilon: float = MUL_EPSILON

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"weight must be in [0, 1], got {self.weight}")
        if self.pool_size is not None and self.pool_size < 1:
            raise ValueError("pool_size must be positive")
        if self.metric not in ("euclidean", "cosine"):
            raise ValueError(f"unknown metric {self.metric!r}")

    @classmethod
    def named(cls, name: str, **kwargs) -> "RetrievalStrategy":
        return cls(Variant(name.lower()), **kwargs)

    def effective_pool(self, k: int) -> int:
        pool = self.pool_size if self.pool_size is not None else POOL_FACTOR * k
        if pool < k:
            raise ValueError(f"pool_size {pool} is smaller than k={k}")
        return pool

    @property
    def label(self) -> str:
        return self.variant.label


@dataclass(frozen=True)
class ScoredFragment:
    fragment_id: str
    semantic_score: float
    emotional_score: float
    final_score: float

    def to_dict(self) -> dict:
        return {
            "fragment_id": self.fragment_id,
            "semantic_score": self.semantic_score,
            "emotional_score": self.emotional_score,
            "final_score": self.final_score,
        }


@dataclass(frozen=True)
class Query:
    text: str
    semantic: SemanticVector
    emotion: EmotionVector


def encode_query(text: str, embedder, scorer, *, lang: str = "en") -> Query:
    if not text or not text.strip():
        raise ValueError("query text must be non-empty")
    semantic = embed(text, embedder)
    emotion = score_emotion(text, scorer, lang=lang)
    return Query(text, semantic, emotion)


def combine_add(s_norm: float, e_norm: float, weight: float = DEFAULT_WEIGHT) -> float:
    return weight * s_norm + (1.0 - weight) * e_norm


def combine_mul(s_norm: float, e_norm: float, epsilon: float = MUL_EPSILON) -> float:
    return (s_norm + epsilon) * (e_norm + epsilon)


def min_max(values: list[float]) -> list[float]:
    """Scale to [0, 1]; a constant family maps to all zeros."""
    if not values:
        return []
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.0] * len(values)
    span = hi - lo
    return [(v - lo) / span for v in values]


def sequential_rerank(
    primary_scores: dict[str, float],
    secondary_scores: dict[str, float],
    pool_size: int,
    k: int,
) -> list[str]:
    """Shortlist by ``primary_scores``, re-rank by ``secondary_scores``."""
    if pool_size < k:
        raise ValueError(f"pool_size {pool_size} is smaller than k={k}")
    if primary_scores.keys() != secondary_scores.keys():
        raise ValueError("score maps must cover the same fragments")
    pool = sorted(primary_scores, key=lambda i: (primary_scores[i], i))[:pool_size]
    pool.sort(key=lambda i: (secondary_scores[i], i))
    return pool[:k]


def score_unit(query: Query, unit, metric: str = "euclidean") -> tuple[list[str], list[float], list[float]]:
    """Raw semantic and emotional distances of every fragment, in unit order."""
    missing = unit.uncached_ids()
    if missing:
        raise UncachedVectorError(missing)
    ids, sem, emo = [], [], []
    for frag in unit:
        ids.append(frag.id)
        sem.append(semantic_distance(query.semantic, frag.semantic, metric))
        emo.append(emotion_distance(query.emotion, frag.emotion))
    return ids, sem, emo


def retrieve(query: Query, unit, strategy: RetrievalStrategy | None = None, k: int = DEFAULT_K) -> list[ScoredFragment]:
    """Top-``k`` fragments by ascending final score."""
    strategy = strategy or RetrievalStrategy()
    if k < 1:
        raise ValueError("k must be >= 1")
    ids, sem, emo = score_unit(query, unit, strategy.metric)
    variant = strategy.variant

    if variant in (Variant.SEQ_SEMANTIC_FIRST, Variant.SEQ_EMOTION_FIRST):
        pool = strategy.effective_pool(k)
        sem_map, emo_map = dict(zip(ids, sem)), dict(zip(ids, emo))
        if variant is Variant.SEQ_SEMANTIC_FIRST:
            order = sequential_rerank(sem_map, emo_map, pool, k)
            final = emo_map
        else:
            order = sequential_rerank(emo_map, sem_map, pool, k)
            final = sem_map
        return [ScoredFragment(i, sem_map[i], emo_map[i], final[i]) for i in order]

    if variant is Variant.SEMANTIC_ONLY:
        finals = list(sem)
    else:
        s_in, e_in = (min_max(sem), min_max(emo)) if strategy.normalize else (sem, emo)
        if variant is Variant.COMBINE_ADD:
            finals = [combine_add(s, e, strategy.weight) for s, e in zip(s_in, e_in)]
        else:
            finals = [combine_mul(s, e, strategy.epsilon) for s, e in zip(s_in, e_in)]

    scored = [ScoredFragment(i, s, e, f) for i, s, e, f in zip(ids, sem, emo, finals)]
    scored.sort(key=lambda r: (r.final_score, r.fragment_id))
    return scored[:k]
