"""One role-play turn: encode the query, retrieve memories, generate a reply."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import UncachedVectorError
from .prompts import build_generation_prompt
from .retrieval import DEFAULT_K, Query, RetrievalStrategy, ScoredFragment, encode_query, retrieve


@dataclass
class Backends:
    embedder: object
    scorer: object
    generator: object
    judge: object | None = None
    lang: str = "en"
    registry: object | None = None
    temperature: float = 0.0
    max_tokens: int = 512
    model: str = ""


@dataclass(frozen=True)
class Turn:
    query: Query
    retrieved: tuple[ScoredFragment, ...]
    reply: str

    @property
    def fragment_ids(self) -> list[str]:
        return [r.fragment_id for r in self.retrieved]


def retrieve_for(text: str, unit, strategy: RetrievalStrategy, backends: Backends, k: int = DEFAULT_K):
    missing = unit.uncached_ids()
    if missing:
        raise UncachedVectorError(missing)
    query = encode_query(text, backends.embedder, backends.scorer, lang=backends.lang)
    return query, retrieve(query, unit, strategy, k)


def respond(profile, unit, text: str, strategy: RetrievalStrategy, backends: Backends, k: int = DEFAULT_K) -> Turn:
    query, hits = retrieve_for(text, unit, strategy, backends, k)
    by_id = unit.by_id()
    request = build_generation_prompt(
        profile,
        [by_id[h.fragment_id] for h in hits],
        text,
        registry=backends.registry,
        lang=backends.lang,
        temperature=backends.temperature,
        max_tokens=backends.max_tokens,
        model=backends.model,
    )
    return Turn(query, tuple(hits), backends.generator.chat(request))
