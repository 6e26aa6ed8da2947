"""Personality instruments and ground-truth labels."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class Instrument(str, Enum):
    MBTI = "MBTI"
    BFI = "BFI"


@dataclass(frozen=True)
class Dimension:
    key: str
    name: str
    first: str  # letter for scores >= 0.5
    second: str
    first_name: str
    second_name: str


MBTI_DIMENSIONS = (
    Dimension("EI", "Extraversion vs. Introversion", "E", "I", "Extraversion", "Introversion"),
    Dimension("SN", "Sensing vs. Intuition", "S", "N", "Sensing", "Intuition"),
    Dimension("TF", "Thinking vs. Feeling", "T", "F", "Thinking", "Feeling"),
    Dimension("JP", "Judging vs. Perceiving", "J", "P", "Judging", "Perceiving"),
)

# BFI is continuous; the categorical reading is high/low at 0.5.
BFI_DIMENSIONS = tuple(
    Dimension(key, name, "H", "L", f"high {name}", f"low {name}")
    for key, name in (
        ("O", "Openness"),
        ("C", "Conscientiousness"),
        ("E", "Extraversion"),
        ("A", "Agreeableness"),
        ("N", "Neuroticism"),
    )
)

THRESHOLD = 0.5


def dimensions(instrument) -> tuple[Dimension, ...]:
    instrument = Instrument(instrument)
    return MBTI_DIMENSIONS if instrument is Instrument.MBTI else BFI_DIMENSIONS


def dimension(instrument, key: str) -> Dimension:
    for d in dimensions(instrument):
        if d.key == key:
            return d
    raise KeyError(f"{Instrument(instrument).value} has no dimension {key!r}")


def letter_for(dim: Dimension, score: float) -> str:
    # 0.5 resolves to the first pole
    return dim.first if score >= THRESHOLD else dim.second


def _check_scores(name, scores, n):
    if scores is None:
        return None
    scores = tuple(float(s) for s in scores)
    if len(scores) != n:
        raise ValueError(f"{name} needs {n} values, got {len(scores)}")
    for s in scores:
        if not (math.isfinite(s) and 0.0 <= s <= 1.0):
            raise ValueError(f"{name} value {s} outside [0, 1]")
    return scores


@dataclass(frozen=True)
class PersonalityLabel:
    mbti_type: str | None = None
    mbti_scores: tuple[float, ...] | None = None
    bfi_scores: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.mbti_type is not None:
            t = self.mbti_type.upper()
            if len(t) != 4 or any(c not in (d.first, d.second) for c, d in zip(t, MBTI_DIMENSIONS)):
                raise ValueError(f"invalid MBTI type {self.mbti_type!r}")
            object.__setattr__(self, "mbti_type", t)
        object.__setattr__(self, "mbti_scores", _check_scores("mbti_scores", self.mbti_scores, 4))
        object.__setattr__(self, "bfi_scores", _check_scores("bfi_scores", self.bfi_scores, 5))

    def letters(self, instrument) -> tuple[str, ...] | None:
        """Ground-truth categorical letter per dimension, or None if unlabeled."""
        instrument = Instrument(instrument)
        if instrument is Instrument.MBTI:
            if self.mbti_type is not None:
                return tuple(self.mbti_type)
            scores = self.mbti_scores
        else:
            scores = self.bfi_scores
        if scores is None:
            return None
        return tuple(letter_for(d, s) for d, s in zip(dimensions(instrument), scores))

    def scores(self, instrument) -> tuple[float, ...] | None:
        """Per-dimension values on the [0, 1] scale used for MSE/MAE.

        An MBTI label given only as a type maps each letter to 1.0 (first
        pole) or 0.0 (second pole).
        """
        instrument = Instrument(instrument)
        if instrument is Instrument.BFI:
            return self.bfi_scores
        if self.mbti_scores is not None:
            return self.mbti_scores
        if self.mbti_type is not None:
            return tuple(1.0 if c == d.first else 0.0 for c, d in zip(self.mbti_type, MBTI_DIMENSIONS))
        return None

    def to_dict(self) -> dict:
        return {
            "mbti_type": self.mbti_type,
            "mbti_scores": list(self.mbti_scores) if self.mbti_scores is not None else None,
            "bfi_scores": list(self.bfi_scores) if self.bfi_scores is not None else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PersonalityLabel":
        return cls(data.get("mbti_type"), data.get("mbti_scores"), data.get("bfi_scores"))
