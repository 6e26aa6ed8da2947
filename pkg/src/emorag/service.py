"""HTTP service exposing retrieval and chat.

POST /retrieve  {"character_id", "query", "strategy"?, "k"?}  -> [ScoredFragment + text, ...]
POST /chat      {"character_id", "query", "strategy"?, "k"?}  -> {"reply", "used_fragment_ids"}
GET  /characters                                             -> [CharacterProfile, ...]
GET  /healthz                                                -> {"status": "ok"}

Errors are ``{"error": <kind>, "detail": <message>}`` with status 400
(malformed body), 404 (unknown character), 409 (vectors not precomputed)
or 503 (backend unavailable).
"""
from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .engine import Engine
from .errors import BackendError, ParseError, UncachedVectorError, UnknownCharacterError
from .retrieval import Variant


class QueryBody(BaseModel):
    character_id: str
    query: str = Field(min_length=1)
    strategy: Optional[Variant] = None
    k: Optional[int] = Field(default=None, ge=1)


def _error(status: int, kind: str, detail) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": kind, "detail": detail})


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="emorag", version="0.1.0")

    @app.exception_handler(RequestValidationError)
    async def bad_request(request: Request, exc: RequestValidationError):
        return _error(400, "bad_request", [e.get("msg") for e in exc.errors()])

    @app.exception_handler(ValueError)
    async def invalid(request: Request, exc: ValueError):
        return _error(400, "bad_request", str(exc))

    @app.exception_handler(UnknownCharacterError)
    async def not_found(request: Request, exc: UnknownCharacterError):
        return _error(404, "unknown_character", str(exc))

    @app.exception_handler(UncachedVectorError)
    async def uncached(request: Request, exc: UncachedVectorError):
        return _error(409, "uncached_vectors", str(exc))

    @app.exception_handler(BackendError)
    @app.exception_handler(ParseError)
    async def unavailable(request: Request, exc: Exception):
        return _error(503, "backend_unavailable", f"{type(exc).__name__}: {exc}")

    def resolve(body: QueryBody):
        engine.profile(body.character_id)
        strategy, k = engine.strategy(body.strategy.value if body.strategy else None)
        return strategy, body.k or k

    # plain `def` handlers run in the threadpool; backend calls block
    @app.post("/retrieve")
    def retrieve(body: QueryBody):
        strategy, k = resolve(body)
        rows = engine.retrieve(body.character_id, body.query, strategy, k)
        return [dict(s.to_dict(), text=f.text) for s, f in rows]

    @app.post("/chat")
    def chat(body: QueryBody):
        strategy, k = resolve(body)
        turn = engine.chat(body.character_id, body.query, strategy, k)
        return {"reply": turn.reply, "used_fragment_ids": turn.fragment_ids}

    @app.get("/characters")
    def characters():
        return [engine.profiles[c].to_dict() for c in sorted(engine.profiles)]

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    return app
