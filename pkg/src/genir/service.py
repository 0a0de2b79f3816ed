"""HTTP shell for live human-in-the-loop sessions.

Sessions live in memory for the service lifetime; completed sessions are
appended to a JSONL trajectory log. Per-session round execution is
serialized: a second round posted while one is in flight gets a 409.
"""

import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import Response
from pydantic import BaseModel

from .errors import (
    EmptyQuery,
    GatewayError,
    InvalidConfig,
    SessionFinished,
    UnknownTarget,
)
from .curation import record_to_json, trace_to_records
from .session import FeedbackMode, SessionConfig, SessionEngine, SessionTrace


class CreateSessionRequest(BaseModel):
    mode: str
    k: int = 10
    max_rounds: int = 10
    target_id: str | None = None
    visual_fraction: float | None = None
    success_rule: str = "manual"   # the human declares success in live sessions


class RoundRequest(BaseModel):
    query: str


class CompleteRequest(BaseModel):
    found_id: str | None = None


def _round_view(trace: SessionTrace, record) -> dict:
    retrieved = []
    if record.retrieved is not None:
        retrieved = [
            {"id": rid, "image_url": f"/api/images/db/{rid}", "similarity": sim}
            for rid, sim in record.retrieved.entries
        ]
    synthetic_url = (f"/api/images/{record.synthetic_image_ref}"
                     if record.synthetic_image_ref else None)
    return {
        "round": record.round,
        "query": record.query,
        "synthetic_image_url": synthetic_url,
        "retrieved": retrieved,
        "status": trace.status,
        "error": record.error,
    }


def _trace_view(trace: SessionTrace) -> dict:
    return {
        "session_id": trace.session_id,
        "mode": trace.config.mode.kind,
        "k": trace.config.k,
        "max_rounds": trace.config.max_rounds,
        "target_id": trace.target_id,
        "status": trace.status,
        "rounds": [_round_view(trace, r) for r in trace.rounds],
    }


def create_app(engine: SessionEngine, trajectory_log: str | None = None,
               cors_origins=("*",)) -> FastAPI:
    app = FastAPI(title="genir session service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )
    round_locks: dict[str, threading.Lock] = {}
    log_lock = threading.Lock()
    log_path = Path(trajectory_log) if trajectory_log else None

    def _session_or_404(session_id: str) -> SessionTrace:
        trace = engine.get_session(session_id)
        if trace is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return trace

    def _append_log(trace: SessionTrace):
        if log_path is None:
            return
        with log_lock:
            log_path.parent.mkdir(parents=True, exist_ok=True)
            with log_path.open("a", encoding="utf-8") as fh:
                for rec in trace_to_records(trace):
                    fh.write(record_to_json(rec) + "\n")

    @app.get("/api/health")
    def health():
        return {"status": "ok", "index_size": engine.index.size,
                "dim": engine.index.dim}

    @app.post("/api/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        try:
            mode = FeedbackMode(kind=req.mode, visual_fraction=req.visual_fraction)
            config = SessionConfig(mode=mode, k=req.k, max_rounds=req.max_rounds,
                                   success_rule=req.success_rule)
            trace = engine.create_session(config, target_id=req.target_id)
        except UnknownTarget as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except InvalidConfig as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        round_locks[trace.session_id] = threading.Lock()
        return {"session_id": trace.session_id}

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        return _trace_view(_session_or_404(session_id))

    @app.post("/api/sessions/{session_id}/rounds")
    def post_round(session_id: str, req: RoundRequest):
        trace = _session_or_404(session_id)
        lock = round_locks.setdefault(session_id, threading.Lock())
        if not lock.acquire(blocking=False):
            raise HTTPException(status_code=409,
                                detail="a round for this session is already in flight")
        try:
            record = engine.run_round(trace, req.query)
        except SessionFinished:
            raise HTTPException(status_code=410, detail=f"session is {trace.status}")
        except EmptyQuery as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except GatewayError as exc:
            raise HTTPException(status_code=502,
                                detail={"stage": exc.stage, "message": str(exc)})
        finally:
            lock.release()
        return _round_view(trace, record)

    @app.post("/api/sessions/{session_id}/complete")
    def complete_session(session_id: str, req: CompleteRequest):
        trace = _session_or_404(session_id)
        if trace.status not in ("running", "exhausted"):
            raise HTTPException(status_code=410, detail=f"session is {trace.status}")
        if req.found_id is not None:
            if req.found_id not in engine.index:
                raise HTTPException(status_code=404,
                                    detail=f"unknown image {req.found_id}")
            trace.status = "succeeded"
        else:
            trace.status = "abandoned"
        _append_log(trace)
        return _trace_view(trace)

    @app.get("/api/images/{ref:path}")
    def get_image(ref: str):
        if ref.startswith("db/"):
            image_id = ref[3:]
            if engine.image_provider is None or image_id not in engine.index:
                raise HTTPException(status_code=404, detail=f"unknown image {ref}")
            blob = engine.image_provider(image_id)
        else:
            blob = engine.image_store.get(ref)
            if blob is None:
                raise HTTPException(status_code=404, detail=f"unknown image {ref}")
        media = "image/png" if blob.format == "png" else "image/jpeg"
        return Response(content=blob.data, media_type=media)

    return app
