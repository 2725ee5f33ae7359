"""HTTP + WebSocket surface for sessions, pads, config, and summarization.

Thin layer over MinutemanService: REST endpoints for session lifecycle,
chunk ingestion and on-demand summarization, plus a per-session sync socket
that streams snapshots and applied operations to collaborative clients.
"""

from __future__ import annotations

import asyncio
import logging
import os
import threading
from pathlib import Path

from fastapi import FastAPI, Request, Response, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from starlette.concurrency import run_in_threadpool

from .asr import make_asr_backend
from .doc import SYSTEM_AUTHOR, AppliedEdit, EditOp, component_from_json, component_to_json
from .errors import (EditRejected, FormatError, MinutemanError, NotFoundError,
                     SequencingError, ValidationError)
from .service import MinutemanService, Session
from .summarizer import make_summarizer_backend

logger = logging.getLogger("minuteman.gateway")


def _applied_to_json(applied: AppliedEdit) -> dict:
    return {
        "type": "edit-applied",
        "doc_id": applied.doc_id,
        "revision": applied.revision,
        "author": applied.author,
        "components": [component_to_json(c) for c in applied.components],
    }


class _AuthorRegistry:
    """Client display names get a server-assigned unique suffix per session."""

    def __init__(self) -> None:
        self._counts: dict[str, int] = {}
        self._lock = threading.Lock()

    def assign(self, session_id: str, display: str) -> str:
        name = " ".join(str(display).split()) or "guest"
        if name == SYSTEM_AUTHOR:
            name = "user"
        with self._lock:
            n = self._counts.get(session_id, 0) + 1
            self._counts[session_id] = n
        return f"{name}#{n}"


def create_app(service: MinutemanService) -> FastAPI:
    app = FastAPI(title="minuteman")
    app.state.service = service
    authors = _AuthorRegistry()

    @app.exception_handler(MinutemanError)
    async def on_error(_request: Request, exc: MinutemanError):
        status = 500
        if isinstance(exc, NotFoundError):
            status = 404
        elif isinstance(exc, (ValidationError, FormatError)):
            status = 400
        elif isinstance(exc, SequencingError):
            status = 409
        elif isinstance(exc, EditRejected):
            status = 409
        return JSONResponse({"error": str(exc)}, status_code=status)

    @app.post("/sessions")
    async def create_session(request: Request):
        body = await request.body()
        payload = {}
        if body:
            try:
                payload = await request.json()
            except Exception:
                raise ValidationError("body must be JSON")
        words = payload.get("chunk_length_words")
        if words is not None and not isinstance(words, int):
            raise ValidationError("chunk_length_words must be an integer")
        session = service.create_session(words)
        return {"session_id": session.session_id,
                "chunk_length_words": session.chunk_length_words}

    @app.post("/sessions/{sid}/tracks/{tid}/chunks/{seq}")
    async def ingest_chunk(sid: str, tid: str, seq: int, request: Request):
        payload = await request.body()
        return service.ingest_chunk(sid, tid, seq, payload)

    @app.put("/sessions/{sid}/config")
    async def set_config(sid: str, request: Request):
        payload = await request.json()
        words = payload.get("chunk_length_words")
        if not isinstance(words, int):
            raise ValidationError("chunk_length_words must be an integer")
        service.set_chunk_length(sid, words)
        return {"session_id": sid, "chunk_length_words": words}

    @app.put("/sessions/{sid}/tracks/{tid}/speaker")
    async def set_speaker(sid: str, tid: str, request: Request):
        payload = await request.json()
        label = payload.get("display_name")
        if not isinstance(label, str):
            raise ValidationError("display_name must be a string")
        service.register_speaker(sid, tid, label)
        return {"session_id": sid, "track_id": tid, "display_name": label}

    @app.post("/sessions/{sid}/close")
    async def close_session(sid: str):
        service.close_session(sid)
        return {"session_id": sid, "closed": True}

    @app.post("/sessions/{sid}/summarize")
    async def summarize(sid: str, request: Request):
        payload = await request.json()
        start_seq = payload.get("start_seq")
        end_seq = payload.get("end_seq")
        if not isinstance(start_seq, int) or not isinstance(end_seq, int):
            raise ValidationError("start_seq and end_seq must be integers")
        return service.summarize_selection(sid, start_seq, end_seq)

    @app.post("/sessions/{sid}/debug")
    async def set_debug(sid: str, request: Request):
        payload = await request.json()
        service.set_debug(sid, bool(payload.get("enabled")))
        return {"session_id": sid, "debug": bool(payload.get("enabled"))}

    @app.get("/sessions/{sid}/transcript")
    async def get_transcript(sid: str):
        session = service.get_session(sid)
        with session.lock:
            return PlainTextResponse(session.transcript.text)

    @app.get("/sessions/{sid}/summary")
    async def get_summary(sid: str):
        session = service.get_session(sid)
        with session.lock:
            return PlainTextResponse(session.summary.text)

    @app.get("/sessions/{sid}/points")
    async def get_points(sid: str):
        session = service.get_session(sid)
        with session.lock:
            return {"points": session.orchestrator.points_view()}

    @app.get("/sessions/{sid}/events")
    async def get_events(sid: str):
        session = service.get_session(sid)
        return {"events": session.events.all()}

    @app.websocket("/sessions/{sid}/sync")
    async def sync(ws: WebSocket, sid: str):
        await ws.accept()
        try:
            session = service.get_session(sid)
        except NotFoundError:
            await ws.send_json({"type": "error", "message": f"no session {sid!r}"})
            await ws.close(code=4404)
            return
        try:
            hello = await ws.receive_json()
        except WebSocketDisconnect:
            return
        author_id = authors.assign(sid, hello.get("author", "guest"))
        await _run_sync(ws, service, session, author_id)

    assets = Path(os.environ.get("WEB_ASSETS", "frontend/dist"))
    if assets.is_dir():
        app.mount("/", StaticFiles(directory=str(assets), html=True), name="ui")

    return app


async def _run_sync(ws: WebSocket, service: MinutemanService, session: Session,
                    author_id: str) -> None:
    loop = asyncio.get_running_loop()
    outbound: asyncio.Queue = asyncio.Queue()

    def push(item: dict) -> None:
        loop.call_soon_threadsafe(outbound.put_nowait, item)

    on_edit = lambda applied: push(_applied_to_json(applied))  # noqa: E731
    on_debug = lambda enabled: push({"type": "debug", "enabled": enabled})  # noqa: E731
    on_points = lambda view: push({"type": "points", "points": view})  # noqa: E731

    # Snapshot and listener registration are atomic so the op stream has no
    # gap against the snapshot revision.
    with session.lock:
        session.transcript.listeners.append(on_edit)
        session.summary.listeners.append(on_edit)
        session.debug_listeners.append(on_debug)
        session.points_listeners.append(on_points)
        snapshots = [session.transcript.snapshot(), session.summary.snapshot()]
        points = session.orchestrator.points_view()
        debug = session.debug

    try:
        await ws.send_json({"type": "welcome", "author_id": author_id, "debug": debug})
        for snap in snapshots:
            await ws.send_json({"type": "snapshot", **snap})
        await ws.send_json({"type": "points", "points": points})

        async def sender() -> None:
            while True:
                await ws.send_json(await outbound.get())

        send_task = asyncio.create_task(sender())
        try:
            while True:
                message = await ws.receive_json()
                if message.get("type") != "edit":
                    await ws.send_json({"type": "error",
                                        "message": f"unknown message {message.get('type')!r}"})
                    continue
                try:
                    components = tuple(component_from_json(c)
                                       for c in message.get("components", []))
                    op = EditOp(doc_id=message.get("doc_id", ""),
                                base_revision=int(message.get("base_revision", -1)),
                                author=author_id, components=components)
                    await run_in_threadpool(service.apply_edit, session.session_id, op)
                except (MinutemanError, ValueError, TypeError) as exc:
                    await ws.send_json({"type": "error", "message": str(exc)})
        finally:
            send_task.cancel()
    except WebSocketDisconnect:
        pass
    finally:
        with session.lock:
            for bucket, listener in ((session.transcript.listeners, on_edit),
                                     (session.summary.listeners, on_edit),
                                     (session.debug_listeners, on_debug),
                                     (session.points_listeners, on_points)):
                if listener in bucket:
                    bucket.remove(listener)


def main() -> None:
    import uvicorn

    logging.basicConfig(level=logging.INFO)
    bind = os.environ.get("BIND_ADDR", "127.0.0.1:8000")
    host, _, port = bind.rpartition(":")
    service = MinutemanService(
        asr_backend=make_asr_backend(os.environ.get("ASR_URL", "mock:")),
        summarizer_backend=make_summarizer_backend(os.environ.get("SUMM_URL", "mock:")),
    )
    service.start_workers()
    app = create_app(service)
    try:
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000))
    finally:
        service.stop()


if __name__ == "__main__":
    main()
