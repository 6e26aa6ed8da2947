"""Chat and embedding backends behind one OpenAI-compatible HTTP contract.

``OpenAICompatibleClient`` talks to ``{endpoint}/chat/completions`` and
``{endpoint}/embeddings``. Transport errors, HTTP 429 and HTTP 5xx are
retried with capped exponential backoff; 401/403 raise ``AuthError`` at once.
The bearer token comes from the ``EMOMEM_API_KEY`` environment variable.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import httpx

from .errors import AuthError, BackendError, BackendTimeoutError, DimensionError

logger = logging.getLogger(__name__)

API_KEY_ENV = "EMOMEM_API_KEY"
ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        if not isinstance(self.content, str):
            raise TypeError("message content must be a string")


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[Message, ...]
    temperature: float = 0.0
    max_tokens: int = 512
    model: str = ""

    def __post_init__(self):
        msgs = tuple(m if isinstance(m, Message) else Message(**m) for m in self.messages)
        if not msgs:
            raise ValueError("a chat request needs at least one message")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        object.__setattr__(self, "messages", msgs)

    def extended(self, *messages: Message) -> "ChatRequest":
        return ChatRequest(self.messages + tuple(messages), self.temperature, self.max_tokens, self.model)

    def payload(self, default_model: str = "") -> dict:
        return {
            "model": self.model or default_model,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }

    @property
    def last_user_content(self) -> str:
        for m in reversed(self.messages):
            if m.role == "user":
                return m.content
        return ""


def prompt_hash(request: ChatRequest) -> str:
    """Stable key for a request's message list (model and sampling ignored)."""
    blob = json.dumps([[m.role, m.content] for m in request.messages], ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ChatBackend(Protocol):
    def chat(self, request: ChatRequest) -> str: ...


def chat(request: ChatRequest, backend: ChatBackend) -> str:
    return backend.chat(request)


def embed_batch(texts: Sequence[str], backend) -> list:
    """Embed ``texts`` in one call; output order matches input order."""
    from .embedding import SemanticVector

    texts = list(texts)
    if not texts:
        raise ValueError("embed_batch needs at least one text")
    for i, t in enumerate(texts):
        if not t or not t.strip():
            raise ValueError(f"text at index {i} is empty")
    vectors = backend.embed_batch(texts)
    if len(vectors) != len(texts):
        raise BackendError(f"backend returned {len(vectors)} vectors for {len(texts)} texts")
    out = []
    for i, v in enumerate(vectors):
        v = v if isinstance(v, SemanticVector) else SemanticVector.from_array(v)
        if v.dim != backend.dim:
            raise DimensionError(f"index {i}: expected dim {backend.dim}, got {v.dim}")
        out.append(v)
    return out


@dataclass
class BackendConfig:
    provider: str = "mock"  # "openai" or "mock"
    endpoint: str = ""
    model: str = ""
    timeout: float = 30.0
    max_retries: int = 3
    concurrency: int = 4
    requests_per_second: float | None = None
    dim: int = 768
    temperature: float = 0.0
    max_tokens: int = 512
    backoff_base: float = 0.5
    backoff_max: float = 8.0

    @classmethod
    def from_dict(cls, data: dict | None) -> "BackendConfig":
        data = dict(data or {})
        if "api_key" in data:
            raise ValueError(f"credentials do not belong in config files; set {API_KEY_ENV}")
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown backend config keys: {sorted(unknown)}")
        return cls(**data)


class RequestLimiter:
    """Bounds in-flight requests and optionally spaces request starts."""

    def __init__(self, max_in_flight: int = 4, requests_per_second: float | None = None):
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self.max_in_flight = max_in_flight
        self._sem = threading.BoundedSemaphore(max_in_flight)
        self._lock = threading.Lock()
        self._interval = 1.0 / requests_per_second if requests_per_second else 0.0
        self._next_start = 0.0
        self.in_flight = 0
        self.peak_in_flight = 0
        self.total_requests = 0

    def __enter__(self):
        self._sem.acquire()
        if self._interval:
            with self._lock:
                now = time.monotonic()
                start = max(now, self._next_start)
                self._next_start = start + self._interval
            if start > now:
                time.sleep(start - now)
        with self._lock:
            self.in_flight += 1
            self.total_requests += 1
            self.peak_in_flight = max(self.peak_in_flight, self.in_flight)
        return self

    def __exit__(self, *exc):
        with self._lock:
            self.in_flight -= 1
        self._sem.release()
        return False


class OpenAICompatibleClient:
    """Chat + embedding client for any OpenAI-compatible server."""

    def __init__(
        self,
        config: BackendConfig,
        *,
        api_key: str | None = None,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if not config.endpoint:
            raise ValueError("backend endpoint is not configured")
        self.config = config
        self.dim = config.dim
        self.limiter = RequestLimiter(config.concurrency, config.requests_per_second)
        self.retries_performed = 0
        self._sleep = sleep
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        headers = {"Content-Type": "application/json"}
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._http = httpx.Client(
            base_url=config.endpoint.rstrip("/"),
            headers=headers,
            timeout=config.timeout,
            transport=transport,
        )

    def close(self):
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _backoff(self, attempt: int, response: httpx.Response | None) -> float:
        delay = min(self.config.backoff_max, self.config.backoff_base * (2 ** attempt))
        if response is not None and "retry-after" in response.headers:
            try:
                delay = min(self.config.backoff_max, float(response.headers["retry-after"]))
            except ValueError:
                pass
        return delay

    def _post(self, path: str, payload: dict) -> dict:
        last_error: BackendError | None = None
        attempts = self.config.max_retries + 1
        for attempt in range(attempts):
            response = None
            try:
                with self.limiter:
                    response = self._http.post(path, json=payload)
            except httpx.TimeoutException as exc:
                last_error = BackendTimeoutError(f"POST {path} timed out after {self.config.timeout}s: {exc}")
            except httpx.TransportError as exc:
                last_error = BackendError(f"POST {path} transport error: {exc}")
            else:
                status = response.status_code
                if status in (401, 403):
                    raise AuthError(f"POST {path} rejected credentials (HTTP {status})")
                if status == 429 or status >= 500:
                    last_error = BackendError(f"POST {path} failed with HTTP {status}: {response.text[:200]}")
                elif status >= 400:
                    raise BackendError(f"POST {path} failed with HTTP {status}: {response.text[:200]}")
                else:
                    try:
                        return response.json()
                    except ValueError as exc:
                        raise BackendError(f"POST {path} returned invalid JSON") from exc
            if attempt + 1 < attempts:
                delay = self._backoff(attempt, response)
                self.retries_performed += 1
                logger.warning("retry %d/%d for %s in %.2fs: %s", attempt + 1, attempts - 1, path, delay, last_error)
                self._sleep(delay)
        assert last_error is not None
        raise last_error

    def chat(self, request: ChatRequest) -> str:
        data = self._post("/chat/completions", request.payload(self.config.model))
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed chat completion payload: {str(data)[:200]}") from exc
        if not isinstance(content, str):
            raise BackendError("chat completion content is not a string")
        return content

    def embed_batch(self, texts: list[str]) -> list:
        from .embedding import SemanticVector

        data = self._post("/embeddings", {"model": self.config.model, "input": list(texts)})
        items = data.get("data") if isinstance(data, dict) else None
        if not isinstance(items, list):
            raise BackendError(f"malformed embeddings payload: {str(data)[:200]}")
        by_index: dict[int, list] = {}
        for pos, item in enumerate(items):
            idx = item.get("index", pos)
            if "error" in item or item.get("embedding") is None:
                raise BackendError(f"embedding failed for input index {idx}: {item.get('error')}")
            by_index[idx] = item["embedding"]
        missing = [i for i in range(len(texts)) if i not in by_index]
        if missing:
            raise BackendError(f"embedding missing for input index {missing[0]}")
        out = []
        for i in range(len(texts)):
            emb = by_index[i]
            if len(emb) != self.dim:
                raise DimensionError(f"input index {i}: backend declared dim {self.dim} but returned {len(emb)} values")
            out.append(SemanticVector(tuple(emb)))
        return out


# ---------------------------------------------------------------------------
# deterministic offline backends


class MockChatBackend:
    """Offline chat backend.

    Lookup order: canned ``replies`` keyed by :func:`prompt_hash`, then
    ``responder(request)``, then ``default``. Every request is recorded.
    """

    def __init__(
        self,
        replies: dict[str, str] | None = None,
        *,
        responder: Callable[[ChatRequest], str] | None = None,
        default: str | None = None,
    ):
        self.replies = dict(replies or {})
        self.responder = responder
        self.default = default
        self.calls: list[ChatRequest] = []
        self._lock = threading.Lock()

    @property
    def call_count(self) -> int:
        return len(self.calls)

    def chat(self, request: ChatRequest) -> str:
        with self._lock:
            self.calls.append(request)
        key = prompt_hash(request)
        if key in self.replies:
            return self.replies[key]
        if self.responder is not None:
            return self.responder(request)
        if self.default is not None:
            return self.default
        raise BackendError(f"mock backend has no reply for prompt {key[:12]}")


_LEXICON = {
    "joy": {"happy", "joy", "glad", "thrilled", "delighted", "love", "wonderful", "won", "laugh", "fun",
            "开心", "高兴", "快乐"},
    "acceptance": {"trust", "agree", "accept", "friend", "together", "thanks", "thank", "sure", "believe",
                   "信任", "朋友", "谢谢"},
    "fear": {"afraid", "scared", "fear", "terrified", "worried", "nervous", "danger", "panic",
             "害怕", "担心", "恐惧"},
    "surprise": {"surprised", "wow", "sudden", "suddenly", "unexpected", "shocked", "amazing",
                 "惊讶", "没想到", "突然"},
    "sadness": {"sad", "cry", "crying", "lonely", "miss", "dumped", "lost", "tears", "sorry", "grief",
                "难过", "伤心", "哭"},
    "disgust": {"disgusting", "gross", "hate", "awful", "sick", "nasty", "恶心", "讨厌"},
    "anger": {"angry", "furious", "mad", "annoyed", "rage", "damn", "生气", "愤怒"},
    "anticipation": {"excited", "soon", "tomorrow", "plan", "hope", "expect", "can't", "wait", "sea",
                     "期待", "希望", "明天"},
}
_WORD = re.compile(r"[a-z']+")


def lexicon_emotion_responder(request: ChatRequest) -> str:
    """Keyword-count emotion scorer for offline runs.

    Intensity is ``1 + 3 * hits`` capped at 10; a tiny hash-derived offset
    keeps texts without keywords from collapsing onto one vector.
    """
    from .emotion import DIMENSIONS

    text = request.last_user_content
    lower = text.lower()
    words = _WORD.findall(lower)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    parts = []
    for i, dim in enumerate(DIMENSIONS):
        lex = _LEXICON[dim]
        hits = sum(1 for w in words if w in lex)
        hits += sum(lower.count(w) for w in lex if not w.isascii())
        value = min(10, 1 + 3 * hits + digest[i] % 2)
        parts.append(f"{dim}:{value}")
    return ", ".join(parts)


def echo_responder(request: ChatRequest) -> str:
    """Deterministic stand-in for a role-play reply."""
    key = prompt_hash(request)[:10]
    return f"[mock reply {key}] I hear you: {request.last_user_content.strip().splitlines()[-1][:80]}"


def hashed_score_responder(request: ChatRequest) -> str:
    """Deterministic judge: a two-decimal proportion derived from the prompt."""
    digest = hashlib.sha256(prompt_hash(request).encode()).digest()
    return f"{int.from_bytes(digest[:4], 'big') % 101 / 100:.2f}"


_MOCK_RESPONDERS = {
    "scorer": lexicon_emotion_responder,
    "generator": echo_responder,
    "judge": hashed_score_responder,
}


def mock_backend_for(role: str) -> MockChatBackend:
    try:
        return MockChatBackend(responder=_MOCK_RESPONDERS[role])
    except KeyError:
        raise ValueError(f"no mock responder for role {role!r}") from None


def build_chat_backend(config: BackendConfig, role: str, **kwargs):
    if config.provider == "mock":
        return mock_backend_for(role)
    if config.provider == "openai":
        return OpenAICompatibleClient(config, **kwargs)
    raise ValueError(f"unknown provider {config.provider!r}")


def build_embedder(config: BackendConfig, **kwargs):
    from .embedding import HashingEmbedder

    if config.provider in ("mock", "hashing"):
        return HashingEmbedder(dim=config.dim)
    if config.provider == "openai":
        return OpenAICompatibleClient(config, **kwargs)
    raise ValueError(f"unknown provider {config.provider!r}")
