import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor

import httpx
import pytest

from emorag.embedding import HashingEmbedder
from emorag.errors import AuthError, BackendError, BackendTimeoutError, DimensionError
from emorag.gateway import (
    BackendConfig,
    ChatRequest,
    Message,
    MockChatBackend,
    OpenAICompatibleClient,
    chat,
    embed_batch,
    prompt_hash,
)

REQ = ChatRequest((Message("user", "hi"),))


def completion(text):
    return httpx.Response(200, json={"choices": [{"index": 0, "message": {"role": "assistant", "content": text}}]})


def client(handler, **cfg):
    sleeps = []
    config = BackendConfig(provider="openai", endpoint="http://llm.test/v1", model="m", **cfg)
    c = OpenAICompatibleClient(config, api_key="k", transport=httpx.MockTransport(handler), sleep=sleeps.append)
    return c, sleeps


class TestChatRequest:
    def test_needs_messages(self):
        with pytest.raises(ValueError):
            ChatRequest(())

    def test_role_set(self):
        with pytest.raises(ValueError):
            Message("tool", "x")

    def test_accepts_dicts(self):
        r = ChatRequest(({"role": "system", "content": "s"}, {"role": "user", "content": "u"}))
        assert r.messages[1] == Message("user", "u")

    def test_payload_shape(self):
        p = ChatRequest((Message("user", "hi"),), temperature=0.2, max_tokens=9).payload("gpt")
        assert p == {"model": "gpt", "messages": [{"role": "user", "content": "hi"}], "temperature": 0.2, "max_tokens": 9}


class TestMockChat:
    def test_canned_map(self):
        backend = MockChatBackend({prompt_hash(REQ): "canned"})
        assert chat(REQ, backend) == "canned"

    def test_no_reply_is_backend_error(self):
        with pytest.raises(BackendError):
            MockChatBackend().chat(REQ)


class TestClientChat:
    def test_success_and_wire_format(self):
        seen = {}

        def handler(request):
            seen["url"] = str(request.url)
            seen["auth"] = request.headers.get("authorization")
            seen["body"] = json.loads(request.content)
            return completion("hello there")

        c, _ = client(handler)
        assert c.chat(REQ) == "hello there"
        assert seen["url"] == "http://llm.test/v1/chat/completions"
        assert seen["auth"] == "Bearer k"
        assert seen["body"]["model"] == "m"
        assert seen["body"]["messages"] == [{"role": "user", "content": "hi"}]

    def test_retries_5xx_then_succeeds(self, caplog):
        statuses = iter([500, 500, 200])

        def handler(request):
            code = next(statuses)
            return completion("ok") if code == 200 else httpx.Response(code, text="boom")

        c, sleeps = client(handler)
        with caplog.at_level(logging.WARNING, logger="emorag.gateway"):
            assert c.chat(REQ) == "ok"
        assert c.retries_performed == 2
        assert sleeps == [0.5, 1.0]
        assert sum("retry" in r.message for r in caplog.records) == 2

    def test_auth_error_not_retried(self):
        calls = []

        def handler(request):
            calls.append(1)
            return httpx.Response(401, json={"error": "bad key"})

        c, sleeps = client(handler)
        with pytest.raises(AuthError):
            c.chat(REQ)
        assert len(calls) == 1 and sleeps == []

    def test_other_4xx_not_retried(self):
        calls = []

        def handler(request):
            calls.append(1)
            return httpx.Response(400, text="bad")

        c, _ = client(handler)
        with pytest.raises(BackendError):
            c.chat(REQ)
        assert len(calls) == 1

    def test_retry_budget_bounds_attempts(self):
        calls = []

        def handler(request):
            calls.append(1)
            return httpx.Response(503)

        c, sleeps = client(handler, max_retries=2)
        with pytest.raises(BackendError, match="503"):
            c.chat(REQ)
        assert len(calls) == 3
        assert sleeps == [0.5, 1.0]

    def test_429_honours_retry_after(self):
        statuses = iter([429, 200])

        def handler(request):
            return completion("ok") if next(statuses) == 200 else httpx.Response(429, headers={"retry-after": "2"})

        c, sleeps = client(handler)
        assert c.chat(REQ) == "ok"
        assert sleeps == [2.0]

    def test_backoff_is_capped(self):
        c, sleeps = client(lambda r: httpx.Response(500), max_retries=6, backoff_max=3.0)
        with pytest.raises(BackendError):
            c.chat(REQ)
        assert sleeps == [0.5, 1.0, 2.0, 3.0, 3.0, 3.0]

    def test_timeout(self):
        def handler(request):
            raise httpx.ReadTimeout("slow", request=request)

        c, _ = client(handler, max_retries=1)
        with pytest.raises(BackendTimeoutError):
            c.chat(REQ)

    def test_transport_error_retried(self):
        state = {"n": 0}

        def handler(request):
            state["n"] += 1
            if state["n"] == 1:
                raise httpx.ConnectError("refused", request=request)
            return completion("back")

        c, _ = client(handler)
        assert c.chat(REQ) == "back"

    def test_malformed_payload(self):
        c, _ = client(lambda r: httpx.Response(200, json={"nope": 1}))
        with pytest.raises(BackendError):
            c.chat(REQ)

    def test_env_credentials(self, monkeypatch):
        monkeypatch.setenv("EMOMEM_API_KEY", "from-env")
        seen = {}

        def handler(request):
            seen["auth"] = request.headers.get("authorization")
            return completion("x")

        config = BackendConfig(provider="openai", endpoint="http://llm.test/v1")
        OpenAICompatibleClient(config, transport=httpx.MockTransport(handler)).chat(REQ)
        assert seen["auth"] == "Bearer from-env"

    def test_api_key_in_config_rejected(self):
        with pytest.raises(ValueError, match="EMOMEM_API_KEY"):
            BackendConfig.from_dict({"provider": "openai", "api_key": "secret"})


class TestConcurrency:
    def test_in_flight_never_exceeds_bound(self):
        lock = threading.Lock()
        state = {"now": 0, "peak": 0}

        def handler(request):
            with lock:
                state["now"] += 1
                state["peak"] = max(state["peak"], state["now"])
            time.sleep(0.01)
            with lock:
                state["now"] -= 1
            return completion("ok")

        c, _ = client(handler, concurrency=3)
        with ThreadPoolExecutor(max_workers=12) as pool:
            assert list(pool.map(lambda _: c.chat(REQ), range(48))) == ["ok"] * 48
        assert c.limiter.total_requests == 48
        assert c.limiter.peak_in_flight <= 3
        assert state["peak"] <= 3
        assert c.limiter.in_flight == 0

    def test_rate_limit_spaces_requests(self):
        c, _ = client(lambda r: completion("ok"), requests_per_second=50)
        start = time.monotonic()
        for _ in range(5):
            c.chat(REQ)
        assert time.monotonic() - start >= 4 / 50 * 0.9


def embeddings_handler(dim, *, shuffle=False, fail_index=None, short=False):
    def handler(request):
        body = json.loads(request.content)
        data = []
        for i, text in enumerate(body["input"]):
            item = {"object": "embedding", "index": i, "embedding": [float(len(text) + i)] * (dim - 256 if short else dim)}
            if i == fail_index:
                item = {"index": i, "error": "input too long"}
            data.append(item)
        if shuffle:
            data.reverse()
        return httpx.Response(200, json={"object": "list", "data": data, "model": body["model"]})

    return handler


class TestEmbeddings:
    def test_order_preserved_by_index(self):
        c, _ = client(embeddings_handler(4, shuffle=True), dim=4)
        vecs = embed_batch(["a", "bbb", "cc"], c)
        assert [v.values[0] for v in vecs] == [1.0, 4.0, 4.0]
        assert [v.dim for v in vecs] == [4, 4, 4]

    def test_declared_dim_mismatch(self):
        c, _ = client(embeddings_handler(768, short=True), dim=768)
        with pytest.raises(DimensionError, match="512"):
            embed_batch(["hello"], c)

    def test_failed_item_fails_batch_with_index(self):
        c, _ = client(embeddings_handler(4, fail_index=1), dim=4)
        with pytest.raises(BackendError, match="index 1"):
            embed_batch(["a", "b", "c"], c)

    def test_hashing_batch(self):
        emb = HashingEmbedder(dim=16)
        a, b = embed_batch(["a", "b"], emb)
        assert a != b
        assert embed_batch(["a"], emb) == [a]

    def test_empty_batch(self):
        with pytest.raises(ValueError):
            embed_batch([], HashingEmbedder(dim=4))
