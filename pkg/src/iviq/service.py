"""HTTP service for live interactive sessions, plus a model-endpoint app that
serves any gateway over the five-endpoint wire protocol.

Session lifecycle over the API is a strict alternation:
start -> (next -> answer)*, with 409 on any violation. Sessions are
in-memory; each one is a single-writer state machine behind its own lock.
"""

from __future__ import annotations

import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .corpus import CorpusManifest, EmbeddingMatrix
from .errors import (
    CapabilityError,
    GeneratorExhausted,
    IviqError,
    ProviderError,
    SessionStateError,
)
from .heuristic import ObjectLexicon
from .ranking import rank_of
from .session import Question, Session, SessionConfig, start_session

DISPLAY_SLICE = 10


@dataclass
class LiveSession:
    session: Session
    pending: Question | None = None
    pending_since: float | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


@dataclass
class ServiceContext:
    manifest: CorpusManifest | None = None
    index: EmbeddingMatrix | None = None
    gateway: object | None = None
    lexicon: ObjectLexicon | None = None
    default_config: SessionConfig = field(default_factory=SessionConfig)
    ui_dir: Path | None = None

    @property
    def ready(self) -> bool:
        return self.manifest is not None and self.index is not None and self.gateway is not None


def _wire_errors(app: FastAPI) -> None:
    """Every error body follows the documented {"error": {code, message}} shape."""

    @app.exception_handler(HTTPException)
    async def _http_error(_: Request, exc: HTTPException):
        return JSONResponse(
            status_code=exc.status_code,
            content={"error": {"code": exc.status_code, "message": str(exc.detail)}})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={"error": {"code": 422, "message": str(exc.errors()[:3])}})


class StartSessionBody(BaseModel):
    query: str
    target: str | None = None
    config: dict = {}


class AnswerBody(BaseModel):
    answer: str
    # UI-measured human response time (question shown -> submit); when given
    # it is recorded as the round's answer latency
    client_latency_ms: float | None = None


class TextBody(BaseModel):
    text: str


class VideoBody(BaseModel):
    video_id: str
    segment: str = "whole"


class VideoOnlyBody(BaseModel):
    video_id: str


class VqaBody(BaseModel):
    video_id: str
    question: str
    segment: str = "whole"


class ItmBody(BaseModel):
    video_id: str
    text: str


class LmBody(BaseModel):
    prompt: str
    max_tokens: int = 32


def _top_slice(session: Session, manifest: CorpusManifest, n: int = DISPLAY_SLICE) -> list[dict]:
    out = []
    for entry in session.ranked.entries[:n]:
        record = manifest.record(entry.video_id)
        out.append({
            "video_id": entry.video_id,
            "score": entry.cosine_score,
            "itm_score": entry.itm_score,
            "media_uri": record.media_uri,
        })
    return out


def create_app(ctx: ServiceContext) -> FastAPI:
    from fastapi.middleware.cors import CORSMiddleware

    app = FastAPI(title="iviq retrieval service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    _wire_errors(app)
    sessions: dict[str, LiveSession] = {}
    app.state.ctx = ctx
    app.state.sessions = sessions

    def get_live(session_id: str) -> LiveSession:
        live = sessions.get(session_id)
        if live is None:
            raise HTTPException(404, f"unknown session {session_id!r}")
        return live

    @app.get("/api/healthz")
    def healthz():
        return {"status": "ok" if ctx.ready else "loading"}

    @app.post("/api/sessions", status_code=201)
    def start(body: StartSessionBody):
        if not ctx.ready:
            raise HTTPException(503, "index not loaded")
        overrides = dict(body.config)
        unknown = set(overrides) - set(ctx.default_config.to_json())
        if unknown:
            raise HTTPException(400, f"unknown config keys: {sorted(unknown)}")

        def api_answer_fn(request):
            raise SessionStateError(
                "API sessions receive answers through POST /answer")

        try:
            config = SessionConfig.from_json({**ctx.default_config.to_json(), **overrides})
            session = start_session(
                body.query, config, manifest=ctx.manifest, index=ctx.index,
                gateway=ctx.gateway, target=body.target, lexicon=ctx.lexicon,
                answer_fn=api_answer_fn)
        except (ValueError, CapabilityError) as exc:
            raise HTTPException(400, str(exc))
        session_id = secrets.token_hex(16)  # 128 bits
        session.session_id = session_id
        sessions[session_id] = LiveSession(session)
        return {
            "session_id": session_id,
            "round": 0,
            "top": _top_slice(session, ctx.manifest),
        }

    @app.post("/api/sessions/{session_id}/next")
    def next_question(session_id: str):
        live = get_live(session_id)
        with live.lock:
            if live.pending is not None:
                raise HTTPException(409, "a question is already pending; answer it first")
            try:
                question = live.session.peek_question()
            except GeneratorExhausted as exc:
                raise HTTPException(410, str(exc))
            except ProviderError as exc:
                raise HTTPException(502, str(exc))
            live.pending = question
            live.pending_since = time.perf_counter()
            return {
                "question": question.to_json(),
                "round": live.session.rounds_completed + 1,
            }

    @app.post("/api/sessions/{session_id}/answer")
    def answer(session_id: str, body: AnswerBody):
        live = get_live(session_id)
        with live.lock:
            if live.pending is None:
                raise HTTPException(409, "no pending question; call next first")
            text = body.answer.strip().lower()
            if not text:
                raise HTTPException(422, "empty answer; the question stays pending")
            if body.client_latency_ms is not None and body.client_latency_ms >= 0:
                latency = body.client_latency_ms / 1000.0
            else:
                latency = time.perf_counter() - (live.pending_since or time.perf_counter())
            session = live.session
            before = None
            if session.record.target is not None:
                before = rank_of(session.ranked, session.record.target).rank
            try:
                session.complete_round(live.pending, text, latency, "human")
            except ProviderError as exc:
                raise HTTPException(502, str(exc))
            live.pending = None
            live.pending_since = None
            payload = {
                "round": session.rounds_completed,
                "top": _top_slice(session, ctx.manifest),
            }
            if before is not None:
                after = session.record.trajectory[-1]
                payload["rank_delta"] = before - after  # positive = improved
                payload["rank"] = after
            return payload

    @app.get("/api/sessions/{session_id}")
    def get_record(session_id: str):
        live = get_live(session_id)
        with live.lock:
            return live.session.record.to_json()

    @app.get("/api/sessions/{session_id}/state")
    def get_state(session_id: str):
        """Resume view for the UI: record plus pending question and gallery."""
        live = get_live(session_id)
        with live.lock:
            session = live.session
            exhausted = False
            if live.pending is None:
                try:
                    session.peek_question()
                except GeneratorExhausted:
                    exhausted = True
                except ProviderError:
                    pass
            return {
                "record": session.record.to_json(),
                "pending_question": live.pending.to_json() if live.pending else None,
                "round": session.rounds_completed,
                "exhausted": exhausted,
                "top": _top_slice(session, ctx.manifest),
            }

    if ctx.ui_dir is not None and Path(ctx.ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ctx.ui_dir), html=True), name="ui")

    return app


def create_model_app(gateway) -> FastAPI:
    """Serve a gateway over the versioned five-endpoint wire protocol."""
    app = FastAPI(title="iviq model provider")
    _wire_errors(app)

    def guard(fn):
        try:
            return fn()
        except ProviderError as exc:
            raise HTTPException(404, str(exc))
        except IviqError as exc:
            raise HTTPException(400, str(exc))

    @app.post("/v1/embed/text")
    def embed_text(body: TextBody):
        return {"vector": guard(lambda: gateway.embed_text(body.text)).tolist()}

    @app.post("/v1/embed/video")
    def embed_video(body: VideoBody):
        return {"vector": guard(lambda: gateway.embed_video(body.video_id, body.segment)).tolist()}

    @app.post("/v1/caption")
    def caption(body: VideoOnlyBody):
        return {"caption": guard(lambda: gateway.caption(body.video_id))}

    @app.post("/v1/vqa")
    def vqa(body: VqaBody):
        return {"answer": guard(lambda: gateway.vqa(body.video_id, body.question, body.segment))}

    @app.post("/v1/itm")
    def itm(body: ItmBody):
        return {"score": guard(lambda: gateway.itm(body.video_id, body.text))}

    @app.post("/v1/lm/generate")
    def lm_generate(body: LmBody):
        return {"text": guard(lambda: gateway.lm_generate(body.prompt, body.max_tokens))}

    return app
