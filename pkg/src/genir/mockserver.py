"""HTTP server exposing a MockWorld behind the model wire protocol.

Useful for exercising HttpGateway end-to-end and for running the session
service against "remote" backends without any real model stack.
"""

import base64

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .errors import GenIRError, MissingFeedback
from .mockworld import MockWorld, MockWorldConfig


class GenerateRequest(BaseModel):
    prompt: str
    seed: int


class ImagePayload(BaseModel):
    format: str
    data_b64: str


class TextRequest(BaseModel):
    text: str


class InitialQueryRequest(BaseModel):
    target: ImagePayload


class HistoryTurn(BaseModel):
    round: int
    query: str


class RefineRequest(BaseModel):
    target: ImagePayload
    feedback: ImagePayload | None = None
    mode: str
    history: list[HistoryTurn]


def _decode(payload: ImagePayload) -> bytes:
    try:
        return base64.b64decode(payload.data_b64, validate=True)
    except Exception:
        raise HTTPException(status_code=400, detail="invalid base64 image payload")


def create_mock_backend_app(config: MockWorldConfig) -> FastAPI:
    world = MockWorld(config)
    app = FastAPI(title="genir mock model backend")

    @app.post("/v1/generate")
    def generate(req: GenerateRequest):
        data = world.generate(req.prompt, req.seed)
        return {"format": "png", "data_b64": base64.b64encode(data).decode("ascii")}

    @app.post("/v1/embed/image")
    def embed_image(req: ImagePayload):
        try:
            vec = world.embed_image(_decode(req))
        except GenIRError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"dim": len(vec), "embedding": [float(x) for x in vec]}

    @app.post("/v1/embed/text")
    def embed_text(req: TextRequest):
        vec = world.embed_text(req.text)
        return {"dim": len(vec), "embedding": [float(x) for x in vec]}

    @app.post("/v1/agent/initial_query")
    def initial_query(req: InitialQueryRequest):
        try:
            query = world.initial_query(_decode(req.target))
        except GenIRError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"query": query}

    @app.post("/v1/agent/refine")
    def refine(req: RefineRequest):
        feedback = _decode(req.feedback) if req.feedback is not None else None
        history = [(turn.round, turn.query, None) for turn in req.history]
        try:
            query = world.refine(_decode(req.target), feedback, history, req.mode)
        except MissingFeedback as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except GenIRError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"query": query}

    return app
