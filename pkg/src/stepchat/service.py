"""Network service: session lifecycle, the turn endpoint, reads, and health.

A thin JSON-over-HTTP layer over the engine. Turns within one session are
strictly serialized behind a per-session lock; different sessions run
concurrently. Sessions survive restarts: an unknown in-memory id with an
existing log is transparently restored from the store.
"""

from __future__ import annotations

import functools
import secrets
import threading
import time
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .corpus import TaskCorpus
from .decision import decide_pattern, decide_remote
from .gateway import Gateway
from .orchestrator import (
    Session,
    TurnDeps,
    handle_turn,
    load_denylist,
    payload_to_dict,
    turn_to_dict,
)
from .store import SessionStore
from .taskgraph import graph_to_dict

MAX_UTTERANCE_CHARS = 2000


class Engine:
    """Owns sessions, serialization, persistence, and the decision backend."""

    def __init__(
        self,
        corpus: TaskCorpus,
        gateway: Gateway,
        store: Optional[SessionStore] = None,
        decision_backend: str = "pattern",
        denylist: Optional[list[str]] = None,
    ):
        self.corpus = corpus
        self.gateway = gateway
        self.store = store
        self.decision_backend = decision_backend
        self.denylist = denylist if denylist is not None else load_denylist()
        self.sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(session_id, threading.Lock())

    def create_session(self) -> Session:
        session = Session(session_id=secrets.token_hex(16))
        with self._registry_lock:
            self.sessions[session.session_id] = session
            self._locks.setdefault(session.session_id, threading.Lock())
        if self.store is not None:
            self.store.append_created(session)
        return session

    def get_session(self, session_id: str) -> Optional[Session]:
        session = self.sessions.get(session_id)
        if session is not None:
            return session
        if self.store is not None and self.store.exists(session_id):
            restored = self.store.restore(session_id)
            if restored is not None:
                with self._registry_lock:
                    self.sessions.setdefault(session_id, restored)
                    self._locks.setdefault(session_id, threading.Lock())
                return self.sessions[session_id]
        return None

    def _deps(self) -> TurnDeps:
        annotations: list[str] = []
        if self.decision_backend == "remote":
            decide = functools.partial(
                decide_remote, gw=self.gateway, on_error=annotations.append
            )
        else:
            decide = decide_pattern
        return TurnDeps(
            decide=decide,
            corpus=self.corpus,
            gateway=self.gateway,
            store=self.store,
            denylist=self.denylist,
            decision_annotations=annotations,
        )

    def turn(self, session: Session, utterance: str):
        with self._lock_for(session.session_id):
            return handle_turn(session, utterance, self._deps())


class TurnRequest(BaseModel):
    utterance: str


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="stepchat", version="0.1.0")
    app.state.engine = engine
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.post("/v1/sessions")
    def create_session():
        session = engine.create_session()
        return {"session_id": session.session_id}

    @app.post("/v1/sessions/{session_id}/turns")
    def post_turn(session_id: str, body: TurnRequest):
        if len(body.utterance) > MAX_UTTERANCE_CHARS:
            raise HTTPException(
                status_code=422,
                detail=f"utterance exceeds {MAX_UTTERANCE_CHARS} characters",
            )
        session = engine.get_session(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        before = len(session.history)
        started = time.perf_counter()
        session, payload = engine.turn(session, body.utterance)
        latency_ms = int((time.perf_counter() - started) * 1000)
        if len(session.history) > before:
            turn = session.history[-1]
            debug = {
                "action_code": turn.action_code,
                "policy": turn.policy,
                "latency_ms": latency_ms,
            }
        else:  # empty utterance: re-prompt without a turn
            debug = {"action_code": "", "policy": "reprompt", "latency_ms": latency_ms}
        return {
            "response_text": payload.body_text,
            "screen": payload_to_dict(payload),
            "debug": debug,
        }

    @app.get("/v1/sessions/{session_id}/history")
    def get_history(session_id: str):
        session = engine.get_session(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return [turn_to_dict(t) for t in session.history]

    @app.get("/v1/tasks/{task_id}")
    def get_task(task_id: str):
        graph = engine.corpus.get(task_id)
        if graph is None:
            raise HTTPException(status_code=404, detail="unknown task")
        return graph_to_dict(graph)

    @app.get("/healthz")
    def healthz():
        return {
            "status": "ok",
            "corpus_docs": engine.corpus.doc_count,
            "backend": engine.gateway.backend_id,
        }

    return app
