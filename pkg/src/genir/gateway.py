"""Uniform access to the three inference roles: generator, embedder, user-agent.

Two implementations share one interface: MockGateway calls a MockWorld
in-process; HttpGateway speaks the JSON wire protocol to any conforming
backend (including the mock server in genir.mockserver).
"""

import base64
from dataclasses import dataclass, field

import httpx
import numpy as np

from .errors import (
    BackendTimeout,
    BackendUnavailable,
    DimensionMismatch,
    MalformedResponse,
    MissingFeedback,
    PromptTooLong,
)
from .mockworld import MockWorld

MAX_TEXT_BYTES = 8 * 1024

PNG_HEADER = b"\x89PNG\r\n\x1a\n"
JPEG_HEADER = b"\xff\xd8"


@dataclass(frozen=True)
class ImageBlob:
    format: str                  # "png" | "jpeg"
    data: bytes
    origin: str = "generated"    # "generated" | "database"

    def __post_init__(self):
        if not self.data:
            raise MalformedResponse("empty image payload")
        if self.format == "png" and not self.data.startswith(PNG_HEADER):
            raise MalformedResponse("format tag png does not match payload header")
        if self.format == "jpeg" and not self.data.startswith(JPEG_HEADER):
            raise MalformedResponse("format tag jpeg does not match payload header")
        if self.format not in ("png", "jpeg"):
            raise MalformedResponse(f"unsupported image format {self.format!r}")


@dataclass
class DialogHistory:
    turns: list = field(default_factory=list)  # (round, query, feedback_summary)

    def append(self, round_index: int, query: str, feedback_summary: str | None = None):
        expected = self.turns[-1][0] + 1 if self.turns else 0
        if round_index != expected:
            raise ValueError(f"round {round_index}, expected {expected}")
        self.turns.append((round_index, query, feedback_summary))

    def __len__(self):
        return len(self.turns)

    def __bool__(self):
        return bool(self.turns)

    def __getitem__(self, i):
        return self.turns[i]


@dataclass(frozen=True)
class BackendEndpoint:
    role: str            # generator | image_embedder | text_embedder | agent
    base_url: str
    timeout_ms: int = 10_000
    max_retries: int = 2

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")
        if not 0 <= self.max_retries <= 5:
            raise ValueError("max_retries must be in 0..5")


def _check_text(text: str, what: str):
    if not text:
        raise PromptTooLong(f"empty {what}")
    if len(text.encode("utf-8")) > MAX_TEXT_BYTES:
        raise PromptTooLong(f"{what} exceeds {MAX_TEXT_BYTES} bytes")


class MockGateway:
    """In-process gateway over a deterministic MockWorld."""

    def __init__(self, world: MockWorld):
        self.world = world

    @property
    def dim(self) -> int:
        return self.world.config.dim

    def generate_image(self, prompt: str, seed: int) -> ImageBlob:
        _check_text(prompt, "prompt")
        return ImageBlob("png", self.world.generate(prompt, seed), "generated")

    def embed_image(self, blob: ImageBlob) -> np.ndarray:
        return self.world.embed_image(blob.data)

    def embed_text(self, text: str) -> np.ndarray:
        _check_text(text, "text")
        return self.world.embed_text(text)

    def initial_query(self, target: ImageBlob) -> str:
        return self.world.initial_query(target.data)

    def refine_query(self, target: ImageBlob, feedback: ImageBlob | None,
                     history: DialogHistory, mode: str) -> str:
        feedback_data = feedback.data if feedback is not None else None
        return self.world.refine(target.data, feedback_data, list(history.turns), mode)


def mock_image_provider(world: MockWorld, index):
    """Database image lookup for mock stacks: a PNG carrying the stored embedding."""

    def provider(image_id: str) -> ImageBlob:
        vec = index.embedding_of(image_id)
        return ImageBlob("png", world.blob_for_vector(vec), "database")

    return provider


class HttpGateway:
    """Wire-protocol gateway; every malformed reply maps to a typed error."""

    def __init__(self, generator: BackendEndpoint, image_embedder: BackendEndpoint,
                 text_embedder: BackendEndpoint, agent: BackendEndpoint,
                 dim: int, transport: httpx.BaseTransport | None = None):
        self.dim = dim
        self._endpoints = {
            "generator": generator,
            "image_embedder": image_embedder,
            "text_embedder": text_embedder,
            "agent": agent,
        }
        self._client = httpx.Client(transport=transport)

    def close(self):
        self._client.close()

    def _post(self, role: str, path: str, payload: dict) -> dict:
        ep = self._endpoints[role]
        url = ep.base_url.rstrip("/") + path
        last_error = None
        for _ in range(ep.max_retries + 1):
            try:
                resp = self._client.post(url, json=payload,
                                         timeout=ep.timeout_ms / 1000.0)
            except httpx.TimeoutException as exc:
                last_error = BackendTimeout(f"{role} timed out: {exc}", stage=role)
                continue
            except httpx.HTTPError as exc:
                last_error = BackendUnavailable(f"{role} unreachable: {exc}", stage=role)
                continue
            if resp.status_code >= 500:
                last_error = BackendUnavailable(
                    f"{role} returned {resp.status_code}", stage=role)
                continue
            if resp.status_code != 200:
                raise MalformedResponse(
                    f"{role} returned {resp.status_code}: {resp.text[:200]}", stage=role)
            try:
                body = resp.json()
            except ValueError as exc:
                raise MalformedResponse(f"{role} sent non-JSON body", stage=role) from exc
            if not isinstance(body, dict):
                raise MalformedResponse(f"{role} sent non-object body", stage=role)
            return body
        raise last_error

    def _image_payload(self, blob: ImageBlob) -> dict:
        return {
            "format": blob.format,
            "data_b64": base64.b64encode(blob.data).decode("ascii"),
        }

    def _parse_embedding(self, role: str, body: dict) -> np.ndarray:
        if "dim" not in body or "embedding" not in body:
            raise MalformedResponse(f"{role} reply missing dim/embedding", stage=role)
        emb = body["embedding"]
        if not isinstance(emb, list) or body["dim"] != len(emb):
            raise MalformedResponse(f"{role} reply dim/embedding disagree", stage=role)
        if len(emb) != self.dim:
            raise DimensionMismatch(
                f"{role} returned dim {len(emb)}, gateway configured for {self.dim}")
        try:
            vec = np.asarray(emb, dtype=np.float32)
        except (TypeError, ValueError) as exc:
            raise MalformedResponse(f"{role} embedding not numeric", stage=role) from exc
        return vec

    def _parse_query(self, role: str, body: dict) -> str:
        query = body.get("query")
        if not isinstance(query, str) or not query:
            raise MalformedResponse(f"{role} reply missing query text", stage=role)
        return query

    def generate_image(self, prompt: str, seed: int) -> ImageBlob:
        _check_text(prompt, "prompt")
        body = self._post("generator", "/v1/generate",
                          {"prompt": prompt, "seed": int(seed)})
        fmt = body.get("format")
        data_b64 = body.get("data_b64")
        if fmt not in ("png", "jpeg") or not isinstance(data_b64, str):
            raise MalformedResponse("generator reply missing format/data_b64",
                                    stage="generator")
        try:
            data = base64.b64decode(data_b64, validate=True)
        except Exception as exc:
            raise MalformedResponse("generator sent invalid base64",
                                    stage="generator") from exc
        try:
            return ImageBlob(fmt, data, "generated")
        except MalformedResponse as exc:
            raise MalformedResponse(f"generator payload invalid: {exc}",
                                    stage="generator") from exc

    def embed_image(self, blob: ImageBlob) -> np.ndarray:
        body = self._post("image_embedder", "/v1/embed/image",
                          self._image_payload(blob))
        return self._parse_embedding("image_embedder", body)

    def embed_text(self, text: str) -> np.ndarray:
        _check_text(text, "text")
        body = self._post("text_embedder", "/v1/embed/text", {"text": text})
        return self._parse_embedding("text_embedder", body)

    def initial_query(self, target: ImageBlob) -> str:
        body = self._post("agent", "/v1/agent/initial_query",
                          {"target": self._image_payload(target)})
        return self._parse_query("agent", body)

    def refine_query(self, target: ImageBlob, feedback: ImageBlob | None,
                     history: DialogHistory, mode: str) -> str:
        if mode in ("generative", "prediction") and feedback is None:
            raise MissingFeedback(f"mode {mode!r} requires a feedback image")
        payload = {
            "target": self._image_payload(target),
            "feedback": self._image_payload(feedback) if feedback else None,
            "mode": mode,
            "history": [{"round": r, "query": q} for r, q, _ in history.turns],
        }
        body = self._post("agent", "/v1/agent/refine", payload)
        return self._parse_query("agent", body)
