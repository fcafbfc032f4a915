"""HTTP chat service: live sessions with streamed tool traces.

Turns are executed to completion against the configured backend, then their
events are replayed over server-sent events in exact trace order (streaming
is simulated from complete turns; scripted backends make this instant).
Event names: tool_call, tool_result, final_response, error.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from typing import Callable

from fastapi import FastAPI
from fastapi.responses import JSONResponse, StreamingResponse

from .agent import AgentConfig, TurnFailure, TurnRecord, run_turn
from .corpus import Corpus
from .counting import TokenCounter, heuristic_counter
from .gateway import Backend, ChatMessage, stamp_token_count
from .prompts import get_prompt
from .tools import ToolRegistry


@dataclass
class SessionFactory:
    """Everything needed to serve one agent configuration."""
    make_backend: Callable[[], Backend]
    registry: ToolRegistry
    agent_config: AgentConfig


@dataclass
class Session:
    session_id: str
    config_id: str
    backend: Backend
    registry: ToolRegistry
    agent_config: AgentConfig
    history: list[ChatMessage] = field(default_factory=list)
    turns: list[TurnRecord] = field(default_factory=list)
    events: list[tuple[str, dict]] = field(default_factory=list)
    open: bool = True
    lock: threading.Lock = field(default_factory=threading.Lock)


def _sse(events: list[tuple[str, dict]]):
    for name, payload in events:
        yield f"event: {name}\ndata: {json.dumps(payload, ensure_ascii=False)}\n\n"


def _run_session_turn(session: Session, text: str, counter: TokenCounter) -> tuple[list[tuple[str, dict]], bool]:
    """Execute one turn; returns (events, failed)."""
    events: list[tuple[str, dict]] = []

    def on_event(kind: str, payload: dict) -> None:
        events.append((kind, payload))

    try:
        turn = run_turn(session.history, text, session.backend, session.registry,
                        session.agent_config, counter=counter, on_event=on_event)
    except TurnFailure as exc:
        events.append(("error", {"message": str(exc),
                                 "partial_interactions": len(exc.interactions)}))
        session.events.extend(events)
        return events, True
    session.turns.append(turn)
    session.events.extend(events)
    return events, False


def create_app(corpus: Corpus, configs: dict[str, SessionFactory],
               counter: TokenCounter = heuristic_counter) -> FastAPI:
    app = FastAPI(title="chemchat")
    sessions: dict[str, Session] = {}

    def _new_session(config_id: str) -> Session:
        factory = configs[config_id]
        system = stamp_token_count(
            ChatMessage(role="system",
                        content=get_prompt(factory.agent_config.system_prompt_id)),
            counter)
        session = Session(
            session_id=uuid.uuid4().hex[:12], config_id=config_id,
            backend=factory.make_backend(), registry=factory.registry,
            agent_config=factory.agent_config, history=[system])
        sessions[session.session_id] = session
        return session

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions")
    def create_session(body: dict):
        config_id = body.get("config_id")
        if not isinstance(config_id, str) or config_id not in configs:
            return JSONResponse({"error": f"unknown or missing config_id"}, status_code=422)
        session = _new_session(config_id)
        return {"session_id": session.session_id}

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, body: dict):
        session = sessions.get(session_id)
        if session is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        text = body.get("text")
        if not isinstance(text, str) or not text.strip():
            return JSONResponse({"error": "body must carry a non-empty 'text'"}, status_code=422)
        if not session.lock.acquire(blocking=False):
            return JSONResponse({"error": "a turn is already in flight"}, status_code=409)
        try:
            events, failed = _run_session_turn(session, text, counter)
        finally:
            session.lock.release()
        if failed and len(events) == 1:
            return JSONResponse(
                {"error": events[0][1]["message"],
                 "partial_trace": [t.to_dict() for t in session.turns]},
                status_code=502)
        return StreamingResponse(_sse(events), media_type="text/event-stream")

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = sessions.get(session_id)
        if session is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        return {
            "session_id": session.session_id,
            "config_id": session.config_id,
            "open": session.open,
            "turns": [t.to_dict() for t in session.turns],
            "events": [{"event": name, "data": payload} for name, payload in session.events],
        }

    @app.get("/corpus/docs/{db_name}/{title}")
    def get_document(db_name: str, title: str):
        doc = corpus.find_document(db_name, title)
        if doc is None:
            return JSONResponse({"error": "unknown document"}, status_code=404)
        return {
            "db_name": doc.db_name,
            "title": doc.title,
            "aliases": doc.aliases,
            "abstract": doc.abstract,
            "sections": [{"name": s.name, "body": s.body, "token_count": s.token_count}
                         for s in doc.sections],
        }

    @app.post("/compare")
    def compare(body: dict):
        config_ids = body.get("config_ids")
        text = body.get("text")
        if (not isinstance(config_ids, list) or len(config_ids) != 2
                or not all(isinstance(c, str) and c in configs for c in config_ids)
                or not isinstance(text, str) or not text.strip()):
            return JSONResponse({"error": "need config_ids (two known ids) and text"},
                                status_code=422)
        columns = [_new_session(cid) for cid in config_ids]
        results: list[list[tuple[str, dict]]] = [[], []]

        def run(col: int) -> None:
            events, _failed = _run_session_turn(columns[col], text, counter)
            results[col] = events

        threads = [threading.Thread(target=run, args=(i,)) for i in range(2)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        merged: list[tuple[str, dict]] = []
        for col in range(2):
            for name, payload in results[col]:
                merged.append((name, {**payload, "column": col,
                                      "session_id": columns[col].session_id}))
        return StreamingResponse(_sse(merged), media_type="text/event-stream")

    app.state.sessions = sessions
    return app
