"""Multi-round retrieval session state machine.

One round = query -> (generate -> embed | embed text) -> top-k -> label.
Rounds are numbered from 0; round 0 is the initial query's own retrieval.
SessionConfig.max_rounds is the highest round index T, so a session holds
at most T+1 rounds.
"""

from dataclasses import dataclass, field
import hashlib
import time
import uuid

from .errors import (
    EmptyQuery,
    GatewayError,
    InvalidConfig,
    SessionFinished,
    UnknownTarget,
    WrongMode,
)
from .gateway import DialogHistory, ImageBlob
from .index import IndexSnapshot, RetrievalResult, rank_of, top_k

MODE_KINDS = ("generative", "verbal", "prediction", "hybrid_random")
SUCCESS_RULES = ("rank1", "topk", "manual")

# per-stage ranges (ms) for simulated latencies; generation dominates by far
SIMULATED_LATENCY_RANGES = {
    "generate": (8_000, 27_000),
    "embed": (40, 200),
    "retrieve": (1, 20),
    "agent": (500, 3_000),
}


def stable_hash64(*parts) -> int:
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class FeedbackMode:
    kind: str
    visual_fraction: float | None = None

    def __post_init__(self):
        if self.kind not in MODE_KINDS:
            raise InvalidConfig(f"unknown mode kind {self.kind!r}")
        if self.kind == "hybrid_random":
            if self.visual_fraction is None or not 0 <= self.visual_fraction <= 1:
                raise InvalidConfig("hybrid_random requires visual_fraction in [0,1]")
        elif self.visual_fraction is not None:
            raise InvalidConfig("visual_fraction only valid for hybrid_random")


@dataclass(frozen=True)
class SessionConfig:
    mode: FeedbackMode
    k: int = 10
    max_rounds: int = 10
    success_rule: str = "topk"
    stop_on_success: bool = True   # False = curation semantics (run all rounds)

    def __post_init__(self):
        if self.k < 1:
            raise InvalidConfig("k must be >= 1")
        if self.max_rounds < 1:
            raise InvalidConfig("max_rounds must be >= 1")
        if self.success_rule not in SUCCESS_RULES:
            raise InvalidConfig(f"unknown success_rule {self.success_rule!r}")


@dataclass
class RoundRecord:
    round: int
    query: str
    retrieved: RetrievalResult | None
    effective_channel: str                  # "visual" | "verbal"
    synthetic_image_ref: str | None = None
    rank_of_target: int | None = None
    label: int = 0
    latency_ms: dict = field(default_factory=dict)
    error: str | None = None                # failed stage name, if any


@dataclass
class SessionTrace:
    session_id: str
    config: SessionConfig
    target_id: str | None = None
    rounds: list = field(default_factory=list)
    status: str = "running"   # running | succeeded | exhausted | errored | abandoned


def choose_channel(mode: FeedbackMode, session_seed: int) -> str:
    """Per-session hybrid channel draw, deterministic in the seed."""
    if mode.kind != "hybrid_random":
        raise WrongMode(f"choose_channel needs hybrid_random, got {mode.kind!r}")
    # 53-bit uniform from the hash; compare against the visual fraction
    u = (stable_hash64("channel", session_seed) >> 11) / float(1 << 53)
    return "visual" if u < mode.visual_fraction else "verbal"


class SessionEngine:
    """Runs rounds against one immutable index and one gateway.

    image_provider(id) must return the database image for an index id; the
    engine stores synthetic blobs under deterministic refs so traces replay.
    """

    def __init__(self, index: IndexSnapshot, gateway, image_provider=None,
                 latency_mode: str = "wall"):
        if latency_mode not in ("wall", "simulated"):
            raise InvalidConfig(f"unknown latency_mode {latency_mode!r}")
        self.index = index
        self.gateway = gateway
        self.image_provider = image_provider
        self.latency_mode = latency_mode
        self.image_store: dict[str, ImageBlob] = {}
        self._sessions: dict[str, SessionTrace] = {}

    # -- session lifecycle -------------------------------------------------

    def create_session(self, config: SessionConfig, target_id: str | None = None,
                       session_id: str | None = None) -> SessionTrace:
        if config.k > self.index.size:
            raise InvalidConfig(f"k={config.k} exceeds index size {self.index.size}")
        if target_id is not None and target_id not in self.index:
            raise UnknownTarget(f"target {target_id!r} not in index")
        if session_id is None:
            session_id = uuid.uuid4().hex
        if session_id in self._sessions:
            raise InvalidConfig(f"session id {session_id!r} already exists")
        trace = SessionTrace(session_id=session_id, config=config, target_id=target_id)
        self._sessions[session_id] = trace
        return trace

    def get_session(self, session_id: str) -> SessionTrace | None:
        return self._sessions.get(session_id)

    def session_channel(self, trace: SessionTrace) -> str:
        mode = trace.config.mode
        if mode.kind == "hybrid_random":
            return choose_channel(mode, stable_hash64(trace.session_id))
        return "visual" if mode.kind == "generative" else "verbal"

    def _behavior(self, trace: SessionTrace) -> str:
        mode = trace.config.mode
        if mode.kind == "hybrid_random":
            channel = self.session_channel(trace)
            return "generative" if channel == "visual" else "verbal"
        return mode.kind

    # -- timing --------------------------------------------------------------

    def _timed(self, trace, round_index, stage, fn):
        if self.latency_mode == "simulated":
            lo, hi = SIMULATED_LATENCY_RANGES[stage]
            ms = lo + stable_hash64(trace.session_id, round_index, stage) % (hi - lo)
            return fn(), ms
        start = time.perf_counter()
        result = fn()
        return result, int((time.perf_counter() - start) * 1000)

    def simulated_agent_ms(self, session_id, round_index) -> int:
        lo, hi = SIMULATED_LATENCY_RANGES["agent"]
        return lo + stable_hash64(session_id, round_index, "agent") % (hi - lo)

    # -- round execution -------------------------------------------------

    def run_round(self, trace: SessionTrace, query: str,
                  agent_ms: int | None = None) -> RoundRecord:
        if trace.status != "running":
            raise SessionFinished(f"session {trace.session_id} is {trace.status}")
        if not query or not query.strip():
            raise EmptyQuery("query must be non-empty")
        t = len(trace.rounds)
        behavior = self._behavior(trace)
        channel = "visual" if behavior == "generative" else "verbal"
        latency = {"generate": None, "embed": None, "retrieve": None,
                   "agent": agent_ms}
        synthetic_ref = None
        stage = "generate"
        try:
            if behavior == "generative":
                seed = stable_hash64(trace.session_id, t)
                blob, latency["generate"] = self._timed(
                    trace, t, "generate", lambda: self.gateway.generate_image(query, seed))
                synthetic_ref = f"{trace.session_id}_{t}.png"
                self.image_store[synthetic_ref] = blob
                stage = "embed"
                embedding, latency["embed"] = self._timed(
                    trace, t, "embed", lambda: self.gateway.embed_image(blob))
            else:
                stage = "embed"
                embedding, latency["embed"] = self._timed(
                    trace, t, "embed", lambda: self.gateway.embed_text(query))
        except GatewayError as exc:
            failed = exc.stage or stage
            record = RoundRecord(round=t, query=query, retrieved=None,
                                 effective_channel=channel,
                                 synthetic_image_ref=synthetic_ref,
                                 latency_ms=latency, error=failed)
            trace.rounds.append(record)
            self._advance_status(trace, hit=False)
            raise

        result, latency["retrieve"] = self._timed(
            trace, t, "retrieve", lambda: top_k(self.index, embedding, trace.config.k))
        rank = None
        label = 0
        if trace.target_id is not None:
            rank = rank_of(self.index, embedding, trace.target_id)
            label = 1 if result.entries[0][0] == trace.target_id else 0
        record = RoundRecord(round=t, query=query, retrieved=result,
                             effective_channel=channel,
                             synthetic_image_ref=synthetic_ref,
                             rank_of_target=rank, label=label, latency_ms=latency)
        trace.rounds.append(record)
        self._advance_status(trace, hit=self._is_hit(trace, record))
        return record

    def _is_hit(self, trace: SessionTrace, record: RoundRecord) -> bool:
        rule = trace.config.success_rule
        if rule == "manual" or record.rank_of_target is None:
            return False
        if rule == "rank1":
            return record.rank_of_target == 1
        return record.rank_of_target <= trace.config.k

    def _advance_status(self, trace: SessionTrace, hit: bool):
        t = len(trace.rounds) - 1
        if hit and trace.config.stop_on_success:
            trace.status = "succeeded"
        elif t >= trace.config.max_rounds:
            trace.status = "succeeded" if hit else "exhausted"

    # -- simulated sessions ------------------------------------------------

    def run_simulated_session(self, config: SessionConfig, target_id: str,
                              session_id: str | None = None) -> SessionTrace:
        if self.image_provider is None:
            raise InvalidConfig("run_simulated_session requires an image_provider")
        trace = self.create_session(config, target_id, session_id)
        target_blob = self.image_provider(target_id)
        history = DialogHistory()
        behavior = self._behavior(trace)
        try:
            query, agent_ms = self._timed(
                trace, 0, "agent", lambda: self.gateway.initial_query(target_blob))
        except GatewayError:
            trace.status = "errored"
            return trace
        for t in range(config.max_rounds + 1):
            try:
                record = self.run_round(trace, query, agent_ms=agent_ms)
            except GatewayError:
                trace.status = "errored"
                return trace
            history.append(t, query)
            if trace.status != "running":
                break
            feedback = self._feedback_blob(behavior, record)
            try:
                query, agent_ms = self._timed(
                    trace, t + 1, "agent",
                    lambda: self.gateway.refine_query(target_blob, feedback,
                                                      history, behavior))
            except GatewayError:
                trace.status = "errored"
                return trace
        return trace

    def _feedback_blob(self, behavior: str, record: RoundRecord) -> ImageBlob | None:
        if behavior == "generative":
            return self.image_store[record.synthetic_image_ref]
        if behavior == "prediction":
            top1 = record.retrieved.entries[0][0]
            return self.image_provider(top1)
        return None
