"""Shared core behind the CLI and the HTTP service."""
from __future__ import annotations

import logging
from pathlib import Path

from .config import EngineConfig
from .errors import UnknownCharacterError
from .gateway import build_chat_backend, build_embedder
from .pipeline import Backends, Turn, respond, retrieve_for
from .prompts import TemplateRegistry
from .retrieval import RetrievalStrategy
from .store import MemoryUnit, load_memory, load_profiles

logger = logging.getLogger(__name__)


def build_backends(config: EngineConfig) -> Backends:
    registry = TemplateRegistry(config.templates_path) if config.templates_path else None
    return Backends(
        embedder=build_embedder(config.embedder),
        scorer=build_chat_backend(config.scorer, "scorer"),
        generator=build_chat_backend(config.generator, "generator"),
        judge=build_chat_backend(config.judge, "judge"),
        lang=config.lang,
        registry=registry,
        temperature=config.generator.temperature,
        max_tokens=config.generator.max_tokens,
        model=config.generator.model,
    )


def load_units(path: Path | None) -> dict[str, MemoryUnit]:
    """Memory units by character; ``path`` is a JSONL file or a directory of them."""
    if path is None:
        return {}
    files = sorted(Path(path).glob("*.jsonl")) if Path(path).is_dir() else [Path(path)]
    grouped: dict[str, list] = {}
    for f in files:
        for frag in load_memory(f):
            grouped.setdefault(frag.character_id, []).append(frag)
    return {cid: MemoryUnit(tuple(frags)) for cid, frags in grouped.items()}


class Engine:
    """Loaded snapshots of profiles and memory plus the configured backends.

    Snapshots are immutable, so one engine can serve concurrent requests.
    """

    def __init__(self, config: EngineConfig, *, backends: Backends | None = None, profiles=None, units=None):
        self.config = config
        self.backends = backends or build_backends(config)
        self.profiles = dict(profiles) if profiles is not None else (
            load_profiles(config.profiles_path) if config.profiles_path else {}
        )
        self.units = dict(units) if units is not None else load_units(config.memory_path)

    def profile(self, character_id: str):
        try:
            return self.profiles[character_id]
        except KeyError:
            raise UnknownCharacterError(character_id) from None

    def unit(self, character_id: str) -> MemoryUnit:
        self.profile(character_id)
        return self.units.get(character_id, MemoryUnit())

    def strategy(self, name: str | None = None, **overrides) -> tuple[RetrievalStrategy, int]:
        cfg = self.config.with_retrieval(strategy=name, **overrides)
        k = cfg.retrieval.k
        if self.config.max_prompt_fragments is not None:
            k = min(k, self.config.max_prompt_fragments)
        return cfg.retrieval.build(), k

    def retrieve(self, character_id: str, text: str, strategy: RetrievalStrategy | None = None, k: int | None = None):
        """Scored fragments paired with the fragments themselves."""
        unit = self.unit(character_id)
        default_strategy, default_k = self.strategy()
        _, hits = retrieve_for(text, unit, strategy or default_strategy, self.backends, k or default_k)
        by_id = unit.by_id()
        return [(h, by_id[h.fragment_id]) for h in hits]

    def chat(self, character_id: str, text: str, strategy: RetrievalStrategy | None = None, k: int | None = None) -> Turn:
        profile = self.profile(character_id)
        default_strategy, default_k = self.strategy()
        return respond(profile, self.unit(character_id), text, strategy or default_strategy, self.backends, k or default_k)
