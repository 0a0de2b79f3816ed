"""Deterministic stand-ins for the generator, embedder, and user-agent.

The mock world's "images" are vector-carrying PNGs and its "queries" are a
canonical text serialization of a vector plus a round counter. Generation
adds seeded gaussian noise that decays per round; refinement blends the
previous query vector toward the target. Every operation is a pure
function of its arguments and the world config, so full runs replay
byte-for-byte.
"""

import base64
from dataclasses import dataclass
import hashlib

import numpy as np

from .errors import MalformedResponse, MissingFeedback
from .index import normalize
from .pngvec import decode_vector_png, encode_vector_png

QUERY_PREFIX = "genir-mock-query"


@dataclass(frozen=True)
class MockWorldConfig:
    dim: int = 32
    noise_sigma_0: float = 1.0
    noise_decay: float = 0.8
    seed: int = 0
    alpha: float = 0.5  # refinement blend toward the target vector


def _digest_rng(*parts) -> np.random.Generator:
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        if isinstance(part, bytes):
            h.update(part)
        else:
            h.update(str(part).encode("utf-8"))
        h.update(b"\x1f")
    return np.random.default_rng(int.from_bytes(h.digest(), "little"))


def serialize_query(round_index: int, vector) -> str:
    raw = np.asarray(vector, dtype=np.float32).tobytes()
    return f"{QUERY_PREFIX} r={round_index} v={base64.b64encode(raw).decode('ascii')}"


def parse_query(text: str):
    """Return (round_index, vector) or None for free-form text."""
    parts = text.split()
    if len(parts) != 3 or parts[0] != QUERY_PREFIX:
        return None
    if not (parts[1].startswith("r=") and parts[2].startswith("v=")):
        return None
    try:
        round_index = int(parts[1][2:])
        raw = base64.b64decode(parts[2][2:], validate=True)
    except Exception:
        return None
    if len(raw) % 4 != 0:
        return None
    return round_index, np.frombuffer(raw, dtype=np.float32).copy()


class MockWorld:
    """Pure-function model semantics behind both the in-process and HTTP mocks."""

    def __init__(self, config: MockWorldConfig):
        self.config = config

    # -- helpers ---------------------------------------------------------

    def _sigma(self, round_index: int) -> float:
        return self.config.noise_sigma_0 * self.config.noise_decay ** round_index

    def _noise(self, sigma: float, *key) -> np.ndarray:
        if sigma == 0.0:
            return np.zeros(self.config.dim)
        rng = _digest_rng(self.config.seed, *key)
        # per-component scale so the noise vector's expected norm is ~sigma
        return rng.normal(0.0, sigma / np.sqrt(self.config.dim), self.config.dim)

    def _text_vector(self, text: str) -> np.ndarray:
        """Deterministic pseudo-embedding for free-form (non-canonical) text."""
        rng = _digest_rng("free-text", text)
        return rng.normal(0.0, 1.0, self.config.dim)

    def _decode_query(self, text: str):
        parsed = parse_query(text)
        if parsed is not None:
            return parsed
        return 0, self._text_vector(text)

    def blob_for_vector(self, vector) -> bytes:
        return encode_vector_png(np.asarray(vector, dtype=np.float32))

    # -- model roles -----------------------------------------------------

    def generate(self, prompt: str, seed: int) -> bytes:
        """Render the prompt's vector plus round-scaled gaussian noise."""
        round_index, vec = self._decode_query(prompt)
        noisy = vec.astype(np.float64) + self._noise(
            self._sigma(round_index), "generate", prompt, seed
        )
        return self.blob_for_vector(noisy)

    def embed_image(self, blob: bytes) -> np.ndarray:
        return normalize(decode_vector_png(blob), self.config.dim)

    def embed_text(self, text: str) -> np.ndarray:
        _, vec = self._decode_query(text)
        return normalize(vec, self.config.dim)

    def initial_query(self, target_blob: bytes) -> str:
        """Describe the target: its vector perturbed by round-0 noise."""
        target = decode_vector_png(target_blob).astype(np.float64)
        noisy = target + self._noise(self._sigma(0), "initial", target.tobytes())
        return serialize_query(0, noisy)

    def refine(self, target_blob: bytes, feedback_blob, history, mode: str) -> str:
        """Blend the last query toward the target.

        With a visual feedback image the agent sees exactly what went wrong,
        so the blend is noise-free; without one (verbal channel) the verbal
        exchange re-introduces round-scaled noise.
        """
        if not history:
            raise MalformedResponse("refine requires a non-empty history")
        if mode in ("generative", "prediction") and feedback_blob is None:
            raise MissingFeedback(f"mode {mode!r} requires a feedback image")
        last_round, last_vec = self._decode_query(history[-1][1])
        target = decode_vector_png(target_blob).astype(np.float64)
        alpha = self.config.alpha
        blended = (1.0 - alpha) * last_vec.astype(np.float64) + alpha * target
        next_round = last_round + 1
        if feedback_blob is None:
            blended = blended + self._noise(
                self._sigma(next_round), "refine-verbal", history[-1][1]
            )
        return serialize_query(next_round, blended)
