"""Engine configuration, loaded from one YAML file.

Example::

    lang: en
    embedder:  {provider: hashing, dim: 768}
    scorer:    {provider: openai, endpoint: "http://localhost:8000/v1", model: qwen-72b-chat}
    generator: {provider: openai, endpoint: "http://localhost:8000/v1", model: qwen-72b-chat}
    judge:     {provider: openai, endpoint: "https://api.openai.com/v1", model: gpt-3.5-turbo-0125}
    retrieval: {strategy: c-a, k: 10, pool_size: null, weight: 0.5, metric: euclidean, normalize: true}
    paths:     {memory: memory/, profiles: profiles.jsonl, templates: null}
    max_prompt_fragments: null

Relative paths resolve against the config file's directory. Credentials
are never read from this file; see ``EMOMEM_API_KEY``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .gateway import BackendConfig
from .retrieval import DEFAULT_K, RetrievalStrategy, Variant

TOP_KEYS = {"lang", "embedder", "scorer", "generator", "judge", "retrieval", "paths", "max_prompt_fragments"}
RETRIEVAL_KEYS = {"strategy", "k", "pool_size", "weight", "metric", "normalize"}
PATH_KEYS = {"memory", "profiles", "templates"}


@dataclass
class RetrievalSettings:
    strategy: str = Variant.COMBINE_ADD.value
    k: int = DEFAULT_K
    pool_size: int | None = None
    weight: float = 0.5
    metric: str = "euclidean"
    normalize: bool = True

    def build(self) -> RetrievalStrategy:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        strategy = RetrievalStrategy.named(
            self.strategy, pool_size=self.pool_size, weight=self.weight, metric=self.metric, normalize=self.normalize
        )
        strategy.effective_pool(self.k)
        return strategy


@dataclass
class EngineConfig:
    embedder: BackendConfig = field(default_factory=lambda: BackendConfig(provider="hashing"))
    scorer: BackendConfig = field(default_factory=BackendConfig)
    generator: BackendConfig = field(default_factory=BackendConfig)
    judge: BackendConfig = field(default_factory=BackendConfig)
    retrieval: RetrievalSettings = field(default_factory=RetrievalSettings)
    memory_path: Path | None = None
    profiles_path: Path | None = None
    templates_path: Path | None = None
    lang: str = "en"
    max_prompt_fragments: int | None = None

    @classmethod
    def from_dict(cls, data: dict | None, base_dir: str | Path = ".") -> "EngineConfig":
        data = dict(data or {})
        unknown = set(data) - TOP_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        retrieval = dict(data.get("retrieval") or {})
        if set(retrieval) - RETRIEVAL_KEYS:
            raise ValueError(f"unknown retrieval keys: {sorted(set(retrieval) - RETRIEVAL_KEYS)}")
        paths = dict(data.get("paths") or {})
        if set(paths) - PATH_KEYS:
            raise ValueError(f"unknown path keys: {sorted(set(paths) - PATH_KEYS)}")
        base = Path(base_dir)

        def resolve(key):
            value = paths.get(key)
            if value is None:
                return None
            p = Path(value)
            p = p if p.is_absolute() else base / p
            if not p.exists():
                raise FileNotFoundError(f"configured {key} path does not exist: {p}")
            return p

        embedder = BackendConfig.from_dict({"provider": "hashing", **(data.get("embedder") or {})})
        cfg = cls(
            embedder=embedder,
            scorer=BackendConfig.from_dict(data.get("scorer")),
            generator=BackendConfig.from_dict(data.get("generator")),
            judge=BackendConfig.from_dict(data.get("judge")),
            retrieval=RetrievalSettings(**retrieval),
            memory_path=resolve("memory"),
            profiles_path=resolve("profiles"),
            templates_path=resolve("templates"),
            lang=data.get("lang", "en"),
            max_prompt_fragments=data.get("max_prompt_fragments"),
        )
        cfg.retrieval.build()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "EngineConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ValueError(f"{path}: top level must be a mapping")
        return cls.from_dict(data, base_dir=path.parent)

    def with_retrieval(self, **overrides) -> "EngineConfig":
        """Copy with retrieval knobs replaced; ``None`` values are ignored."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        settings = replace(self.retrieval, **changes)
        settings.build()
        return replace(self, retrieval=settings)
