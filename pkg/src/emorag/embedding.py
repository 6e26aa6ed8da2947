"""Semantic vector space: embedding backends and the semantic distance."""
from __future__ import annotations

import hashlib
import math
import threading
from dataclasses import dataclass
from functools import cached_property
from typing import Protocol, Sequence

import numpy as np

from .errors import DimensionError

DEFAULT_DIM = 768
METRICS = ("euclidean", "cosine")


@dataclass(frozen=True)
class SemanticVector:
    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise DimensionError("semantic vector must not be empty")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("semantic vector entries must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_array(cls, arr) -> "SemanticVector":
        return cls(tuple(np.asarray(arr, dtype=float).ravel().tolist()))

    @property
    def dim(self) -> int:
        return len(self.values)

    def __len__(self) -> int:
        return len(self.values)

    @cached_property
    def array(self) -> np.ndarray:
        arr = np.asarray(self.values, dtype=float)
        arr.flags.writeable = False
        return arr


class Embedder(Protocol):
    dim: int

    def embed_batch(self, texts: list[str]) -> list[SemanticVector]: ...


class HashingEmbedder:
    """Deterministic offline embedder.

    Character n-grams of the text (with start/end markers) are hashed into
    ``dim`` signed buckets and the result is L2-normalized. Same text, same
    vector, on every platform.
    """

    def __init__(self, dim: int = DEFAULT_DIM, ngram_range: tuple[int, int] = (1, 3)):
        if dim < 1:
            raise ValueError("dim must be positive")
        lo, hi = ngram_range
        if not 1 <= lo <= hi:
            raise ValueError(f"bad ngram_range {ngram_range}")
        self.dim = dim
        self.ngram_range = (lo, hi)
        self.calls = 0
        self._lock = threading.Lock()

    def embed_batch(self, texts: list[str]) -> list[SemanticVector]:
        with self._lock:
            self.calls += 1
        return [self._vector(t) for t in texts]

    def _vector(self, text: str) -> SemanticVector:
        padded = f"\x02{text}\x03"
        buckets = np.zeros(self.dim)
        lo, hi = self.ngram_range
        for n in range(lo, hi + 1):
            for i in range(len(padded) - n + 1):
                digest = hashlib.blake2b(padded[i:i + n].encode("utf-8"), digest_size=8).digest()
                idx = int.from_bytes(digest[:4], "little") % self.dim
                buckets[idx] += 1.0 if digest[4] & 1 else -1.0
        norm = math.sqrt(math.fsum((buckets * buckets).tolist()))
        if norm == 0.0:
            # every feature cancelled out; keep the vector well-defined
            buckets[0] = 1.0
            norm = 1.0
        return SemanticVector.from_array(buckets / norm)


def embed(text: str, embedder: Embedder) -> SemanticVector:
    if not text or not text.strip():
        raise ValueError("cannot embed empty text")
    vectors = embedder.embed_batch([text])
    if len(vectors) != 1:
        raise DimensionError(f"embedder returned {len(vectors)} vectors for 1 text")
    vec = vectors[0]
    if not isinstance(vec, SemanticVector):
        vec = SemanticVector.from_array(vec)
    if vec.dim != embedder.dim:
        raise DimensionError(f"embedder declares dim {embedder.dim} but returned {vec.dim} values")
    return vec


def semantic_distance(a: SemanticVector, b: SemanticVector, metric: str = "euclidean") -> float:
    """Distance between two embeddings; smaller is more similar.

    Sums use ``math.fsum`` so the value does not depend on memory layout or
    summation order.
    """
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if metric == "euclidean":
        diff = a.array - b.array
        return math.sqrt(math.fsum((diff * diff).tolist()))
    if metric == "cosine":
        dot = math.fsum((a.array * b.array).tolist())
        na = math.sqrt(math.fsum((a.array * a.array).tolist()))
        nb = math.sqrt(math.fsum((b.array * b.array).tolist()))
        if na == 0.0 or nb == 0.0:
            raise ValueError("cosine distance undefined for a zero vector")
        return 1.0 - dot / (na * nb)
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
