"""Eight-dimensional emotion vectors: LLM scoring, parsing and distance."""
from __future__ import annotations

import logging
import math
import re
from dataclasses import astuple, dataclass
from typing import Iterable

from .errors import ParseError
from .gateway import ChatBackend, ChatRequest, Message

logger = logging.getLogger(__name__)

DIMENSIONS = ("joy", "acceptance", "fear", "surprise", "sadness", "disgust", "anger", "anticipation")
MIN_INTENSITY = 1
MAX_INTENSITY = 10
DEFAULT_REPROMPTS = 2


@dataclass(frozen=True)
class EmotionVector:
    joy: int
    acceptance: int
    fear: int
    surprise: int
    sadness: int
    disgust: int
    anger: int
    anticipation: int

    def __post_init__(self):
        for name, value in zip(DIMENSIONS, astuple(self)):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValueError(f"{name} must be an integer, got {value!r}")
            if not MIN_INTENSITY <= value <= MAX_INTENSITY:
                raise ValueError(f"{name}={value} outside [{MIN_INTENSITY}, {MAX_INTENSITY}]")

    @classmethod
    def from_sequence(cls, values: Iterable[int]) -> "EmotionVector":
        values = list(values)
        if len(values) != len(DIMENSIONS):
            raise ValueError(f"expected {len(DIMENSIONS)} intensities, got {len(values)}")
        return cls(*values)

    def as_tuple(self) -> tuple[int, ...]:
        return astuple(self)

    def to_list(self) -> list[int]:
        return list(astuple(self))

    def render(self) -> str:
        return ", ".join(f"{n}:{v}" for n, v in zip(DIMENSIONS, astuple(self)))


_ENTRY = re.compile(r"\b(" + "|".join(DIMENSIONS) + r")\b([^\w\n]*)([\w.+-]*)", re.IGNORECASE)
_INT = re.compile(r"[+-]?\d+")
_NUMBER = re.compile(r"[+-]?\d+(\.\d*)?")


def parse_emotion_response(raw: str) -> EmotionVector:
    """Read the eight ``name:value`` scores out of a scorer reply.

    Names are case-insensitive and may be followed by any punctuation. A
    bare mention of a name in prose ("I sense joy and ...") is ignored.
    """
    found: dict[str, int] = {}
    for match in _ENTRY.finditer(raw or ""):
        name, sep, token = match.group(1).lower(), match.group(2), match.group(3)
        if token.endswith(".") and not token.endswith(".."):
            token = token[:-1]  # sentence-final period
        if _INT.fullmatch(token):
            value = int(token)
            if sep.endswith("-") and value > 0:
                value = -value
        elif _NUMBER.fullmatch(token):
            raise ParseError(f"{name}: non-integer score {token!r}")
        elif sep.strip():
            raise ParseError(f"{name}: unparseable score {token!r}")
        else:
            continue
        if name in found:
            raise ParseError(f"{name}: scored more than once")
        if not MIN_INTENSITY <= value <= MAX_INTENSITY:
            raise ParseError(f"{name}={value} outside [{MIN_INTENSITY}, {MAX_INTENSITY}]")
        found[name] = value
    missing = [d for d in DIMENSIONS if d not in found]
    if missing:
        raise ParseError(f"missing emotion dimensions: {', '.join(missing)}")
    return EmotionVector(*(found[d] for d in DIMENSIONS))


def score_emotion(
    text: str,
    scorer: ChatBackend,
    *,
    lang: str = "en",
    reprompts: int = DEFAULT_REPROMPTS,
    registry=None,
) -> EmotionVector:
    """Ask the scorer model for the emotion vector of ``text``.

    A reply that fails to parse is sent back with a correction request, at
    most ``reprompts`` more times.
    """
    if not text or not text.strip():
        raise ValueError("cannot score empty text")
    from .prompts import build_emotion_request, correction_message

    request = build_emotion_request(text, registry=registry, lang=lang)
    last_error = None
    for attempt in range(reprompts + 1):
        reply = scorer.chat(request)
        try:
            return parse_emotion_response(reply)
        except ParseError as exc:
            last_error = exc
            logger.warning("emotion reply unparseable (attempt %d/%d): %s", attempt + 1, reprompts + 1, exc)
            request = request.extended(
                Message("assistant", reply),
                Message("user", correction_message(str(exc), registry=registry, lang=lang)),
            )
    raise ParseError(f"emotion scoring failed after {reprompts + 1} attempts: {last_error}")


def emotion_distance(a: EmotionVector, b: EmotionVector) -> float:
    """One minus the cosine similarity of two emotion vectors.

    Intensities are positive integers, so the cosine is positive and is
    fixed by the exact rational dot**2 / (|a|**2 * |b|**2). The float is
    derived from that reduced fraction; equal cosines therefore give
    bit-identical distances, which keeps id tie-breaking exact.
    """
    ta, tb = a.as_tuple(), b.as_tuple()
    dot = sum(x * y for x, y in zip(ta, tb))
    num = dot * dot
    den = sum(x * x for x in ta) * sum(y * y for y in tb)
    g = math.gcd(num, den)
    return 1.0 - math.sqrt((num // g) / (den // g))
