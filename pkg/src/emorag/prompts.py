"""Prompt templates: loading, rendering, and the three request builders.

Templates are UTF-8 files named ``<name>.<lang>.txt`` with ``{placeholder}``
slots; ``{{`` and ``}}`` produce literal braces. Values are inserted
verbatim in a single pass, so braces inside a value are never expanded.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Sequence

from .errors import MissingVariableError
from .gateway import ChatRequest, Message

TEMPLATE_DIR = Path(__file__).with_name("templates")
DEFAULT_LANG = "en"

_TOKEN = re.compile(r"\{\{|\}\}|\{([A-Za-z_][A-Za-z0-9_]*)\}")


def placeholders_in(body: str) -> frozenset[str]:
    return frozenset(m.group(1) for m in _TOKEN.finditer(body) if m.group(1))


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str
    required_placeholders: frozenset[str] = field(default=None)

    def __post_init__(self):
        found = placeholders_in(self.body)
        if self.required_placeholders is None:
            object.__setattr__(self, "required_placeholders", found)
            return
        declared = frozenset(self.required_placeholders)
        if declared != found:
            raise ValueError(
                f"template {self.name!r}: declared placeholders {sorted(declared)} "
                f"do not match body placeholders {sorted(found)}"
            )
        object.__setattr__(self, "required_placeholders", declared)


def render(template: PromptTemplate, variables: Mapping[str, object]) -> str:
    missing = template.required_placeholders - set(variables)
    if missing:
        raise MissingVariableError(missing)

    def sub(m: re.Match) -> str:
        tok = m.group(0)
        if tok == "{{":
            return "{"
        if tok == "}}":
            return "}"
        return str(variables[m.group(1)])

    return _TOKEN.sub(sub, template.body)


class TemplateRegistry:
    """Templates keyed by file stem, e.g. ``generation.en``."""

    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory else TEMPLATE_DIR
        if not self.directory.is_dir():
            raise FileNotFoundError(f"template directory not found: {self.directory}")
        self._templates: dict[str, PromptTemplate] = {}
        for path in sorted(self.directory.glob("*.txt")):
            body = path.read_text(encoding="utf-8")
            if body.endswith("\n"):
                body = body[:-1]
            self._templates[path.stem] = PromptTemplate(path.stem, body)

    def names(self) -> list[str]:
        return sorted(self._templates)

    def get(self, name: str, lang: str = DEFAULT_LANG) -> PromptTemplate:
        for key in (f"{name}.{lang}", f"{name}.{DEFAULT_LANG}", name):
            if key in self._templates:
                return self._templates[key]
        raise KeyError(f"no template {name!r} for language {lang!r} in {self.directory}")


@lru_cache(maxsize=None)
def default_registry() -> TemplateRegistry:
    return TemplateRegistry()


def _reg(registry):
    return registry if registry is not None else default_registry()


EMOTION_FORMAT = (
    "joy:<score>, acceptance:<score>, fear:<score>, surprise:<score>, "
    "sadness:<score>, disgust:<score>, anger:<score>, anticipation:<score>"
)


def build_emotion_request(text: str, *, registry=None, lang: str = DEFAULT_LANG) -> ChatRequest:
    system = render(_reg(registry).get("emotion_scoring", lang), {})
    return ChatRequest((Message("system", system), Message("user", text)), temperature=0.0, max_tokens=64)


def correction_message(error: str, *, expected: str = EMOTION_FORMAT, registry=None, lang: str = DEFAULT_LANG) -> str:
    return render(_reg(registry).get("correction", lang), {"error": error, "expected": expected})


def format_memories(memories: Sequence, *, registry=None, lang: str = DEFAULT_LANG) -> str:
    if not memories:
        return render(_reg(registry).get("no_memory", lang), {})
    return "\n".join(f"[{i}] {m.text}" for i, m in enumerate(memories, 1))


def build_generation_prompt(
    profile,
    memories: Sequence,
    query: str,
    *,
    registry=None,
    lang: str = DEFAULT_LANG,
    temperature: float = 0.0,
    max_tokens: int = 512,
    model: str = "",
) -> ChatRequest:
    """One user message: task, role profile, retrieved memories, query.

    ``memories`` are rendered in the order given, which should be the
    retrieval order. Nothing is truncated or deduplicated here.
    """
    body = render(
        _reg(registry).get("generation", lang),
        {
            "role_name": profile.name,
            "role_profile": profile.profile_text,
            "memories": format_memories(memories, registry=registry, lang=lang),
            "query": query,
        },
    )
    return ChatRequest((Message("user", body),), temperature=temperature, max_tokens=max_tokens, model=model)


def build_assessment_request(
    instrument: str,
    dim,
    answers: Sequence[tuple[str, str]],
    *,
    registry=None,
    lang: str = DEFAULT_LANG,
) -> ChatRequest:
    system = render(
        _reg(registry).get("personality_assessment", lang),
        {
            "instrument": instrument,
            "dimension_name": dim.name,
            "first_name": dim.first_name,
            "second_name": dim.second_name,
            "first_letter": dim.first,
            "second_letter": dim.second,
        },
    )
    transcript = "\n\n".join(f"Q{i}: {q}\nA{i}: {a}" for i, (q, a) in enumerate(answers, 1))
    return ChatRequest((Message("system", system), Message("user", transcript)), temperature=0.0, max_tokens=16)
