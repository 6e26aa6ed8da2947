"""Per-character memory units and character profiles, stored as JSONL.

Memory record (one per line)::

    {"id": str, "character_id": str, "text": str,
     "semantic": [float, ...] | null, "emotion": [int x 8] | null,
     "source": str | null}

Profile record (one per line)::

    {"character_id": str, "name": str, "profile_text": str,
     "labels": {"mbti_type": ..., "mbti_scores": ..., "bfi_scores": ...} | null}
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator

from .embedding import SemanticVector, embed
from .emotion import EmotionVector, score_emotion
from .errors import DuplicateIdError, EmoRagError, FormatError
from .personality import PersonalityLabel

logger = logging.getLogger(__name__)

MEMORY_KEYS = ("id", "character_id", "text", "semantic", "emotion", "source")


@dataclass(frozen=True)
class MemoryFragment:
    id: str
    character_id: str
    text: str
    semantic: SemanticVector | None = None
    emotion: EmotionVector | None = None
    source: str | None = None

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ValueError("fragment id must be a non-empty string")
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValueError(f"fragment {self.id}: text must be non-empty")

    @property
    def is_cached(self) -> bool:
        return self.semantic is not None and self.emotion is not None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "character_id": self.character_id,
            "text": self.text,
            "semantic": list(self.semantic.values) if self.semantic is not None else None,
            "emotion": self.emotion.to_list() if self.emotion is not None else None,
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MemoryFragment":
        if not isinstance(data, dict):
            raise ValueError("record is not a JSON object")
        missing = [k for k in ("id", "character_id", "text") if k not in data]
        if missing:
            raise ValueError(f"missing keys: {', '.join(missing)}")
        unknown = set(data) - set(MEMORY_KEYS)
        if unknown:
            raise ValueError(f"unknown keys: {', '.join(sorted(unknown))}")
        if not isinstance(data["character_id"], str):
            raise ValueError("character_id must be a string")
        source = data.get("source")
        if source is not None and not isinstance(source, str):
            raise ValueError("source must be a string or null")
        sem = data.get("semantic")
        emo = data.get("emotion")
        if sem is not None:
            if not isinstance(sem, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in sem):
                raise ValueError("semantic must be an array of numbers or null")
            sem = SemanticVector(tuple(sem))
        if emo is not None:
            if not isinstance(emo, list):
                raise ValueError("emotion must be an array of 8 integers or null")
            emo = EmotionVector.from_sequence(emo)
        return cls(data["id"], data["character_id"], data["text"], sem, emo, source)


@dataclass(frozen=True)
class MemoryUnit:
    """Immutable, ordered snapshot of one memory unit."""

    fragments: tuple[MemoryFragment, ...] = ()

    def __post_init__(self):
        frags = tuple(self.fragments)
        seen = set()
        for f in frags:
            if f.id in seen:
                raise DuplicateIdError(f"duplicate fragment id {f.id!r}")
            seen.add(f.id)
        object.__setattr__(self, "fragments", frags)

    def __len__(self) -> int:
        return len(self.fragments)

    def __iter__(self) -> Iterator[MemoryFragment]:
        return iter(self.fragments)

    def get(self, fragment_id: str) -> MemoryFragment:
        for f in self.fragments:
            if f.id == fragment_id:
                return f
        raise KeyError(fragment_id)

    def by_id(self) -> dict[str, MemoryFragment]:
        return {f.id: f for f in self.fragments}

    def uncached_ids(self) -> list[str]:
        return [f.id for f in self.fragments if not f.is_cached]

    def appended(self, *fragments: MemoryFragment) -> "MemoryUnit":
        return MemoryUnit(self.fragments + fragments)

    def for_character(self, character_id: str) -> "MemoryUnit":
        return MemoryUnit(tuple(f for f in self.fragments if f.character_id == character_id))


def _read_jsonl(path: Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON: {exc.msg}", line=lineno) from None


def _write_jsonl(records: Iterable[dict], path: Path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, allow_nan=False))
            fh.write("\n")
    tmp.replace(path)


def load_memory(path: str | Path) -> MemoryUnit:
    fragments = []
    first_seen: dict[str, int] = {}
    for lineno, record in _read_jsonl(Path(path)):
        try:
            frag = MemoryFragment.from_dict(record)
        except (ValueError, TypeError) as exc:
            raise FormatError(str(exc), line=lineno) from None
        if frag.id in first_seen:
            raise DuplicateIdError(
                f"fragment id {frag.id!r} already used on line {first_seen[frag.id]}", line=lineno
            )
        first_seen[frag.id] = lineno
        fragments.append(frag)
    return MemoryUnit(tuple(fragments))


def save_memory(unit: MemoryUnit, path: str | Path) -> None:
    _write_jsonl((f.to_dict() for f in unit), Path(path))


@dataclass(frozen=True)
class CharacterProfile:
    character_id: str
    name: str
    profile_text: str
    labels: PersonalityLabel | None = None

    def __post_init__(self):
        if not self.character_id:
            raise ValueError("character_id must be non-empty")
        if not isinstance(self.profile_text, str) or not self.profile_text.strip():
            raise ValueError(f"profile {self.character_id}: profile_text must be non-empty")

    def to_dict(self) -> dict:
        return {
            "character_id": self.character_id,
            "name": self.name,
            "profile_text": self.profile_text,
            "labels": self.labels.to_dict() if self.labels is not None else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CharacterProfile":
        missing = [k for k in ("character_id", "name", "profile_text") if k not in data]
        if missing:
            raise ValueError(f"missing keys: {', '.join(missing)}")
        labels = data.get("labels")
        return cls(
            data["character_id"],
            data["name"],
            data["profile_text"],
            PersonalityLabel.from_dict(labels) if labels is not None else None,
        )


def load_profiles(path: str | Path) -> dict[str, CharacterProfile]:
    catalog: dict[str, CharacterProfile] = {}
    for lineno, record in _read_jsonl(Path(path)):
        try:
            profile = CharacterProfile.from_dict(record)
        except (ValueError, TypeError, AttributeError) as exc:
            raise FormatError(str(exc), line=lineno) from None
        if profile.character_id in catalog:
            raise DuplicateIdError(f"character_id {profile.character_id!r} repeated", line=lineno)
        catalog[profile.character_id] = profile
    return catalog


def save_profiles(profiles: Iterable[CharacterProfile], path: str | Path) -> None:
    _write_jsonl((p.to_dict() for p in profiles), Path(path))


@dataclass
class PrecomputeReport:
    ok: list[str] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    failed: dict[str, str] = field(default_factory=dict)

    @property
    def all_ok(self) -> bool:
        return not self.failed

    def summary(self) -> str:
        return f"{len(self.ok)} computed, {len(self.skipped)} already cached, {len(self.failed)} failed"


def precompute_vectors(
    unit: MemoryUnit,
    embedder,
    scorer,
    overwrite: bool = False,
    *,
    lang: str = "en",
    workers: int = 1,
) -> tuple[MemoryUnit, PrecomputeReport]:
    """Fill in the semantic and emotion vectors of every fragment.

    Only missing vectors are computed unless ``overwrite`` is set. Failures
    are collected in the report; fragments that succeeded keep their vectors.
    """
    report = PrecomputeReport()

    def work(frag: MemoryFragment):
        need_sem = overwrite or frag.semantic is None
        need_emo = overwrite or frag.emotion is None
        if not (need_sem or need_emo):
            return frag, "skipped", None
        try:
            sem = embed(frag.text, embedder) if need_sem else frag.semantic
            emo = score_emotion(frag.text, scorer, lang=lang) if need_emo else frag.emotion
        except EmoRagError as exc:
            return frag, "failed", f"{type(exc).__name__}: {exc}"
        return replace(frag, semantic=sem, emotion=emo), "ok", None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, unit.fragments))
    else:
        results = [work(f) for f in unit.fragments]

    out = []
    for frag, status, err in results:
        out.append(frag)
        if status == "ok":
            report.ok.append(frag.id)
        elif status == "skipped":
            report.skipped.append(frag.id)
        else:
            report.failed[frag.id] = err
            logger.warning("precompute failed for %s: %s", frag.id, err)
    return MemoryUnit(tuple(out)), report
