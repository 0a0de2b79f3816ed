"""GenIR: interactive generative image retrieval.

Library surface: exact cosine search over embeddings (genir.index), model
gateways with deterministic mocks (genir.gateway / genir.mockworld), the
multi-round session engine (genir.session), dataset curation
(genir.curation), evaluation (genir.evaluation), and the HTTP session
service (genir.service).
"""

from .index import (
    ImageRecord,
    IndexSnapshot,
    RetrievalResult,
    build_index,
    cosine,
    load_index,
    normalize,
    rank_of,
    save_index,
    top_k,
)
from .gateway import BackendEndpoint, DialogHistory, HttpGateway, ImageBlob, MockGateway
from .mockworld import MockWorld, MockWorldConfig
from .session import FeedbackMode, RoundRecord, SessionConfig, SessionEngine, SessionTrace

__all__ = [
    "ImageRecord", "IndexSnapshot", "RetrievalResult", "build_index", "cosine",
    "load_index", "normalize", "rank_of", "save_index", "top_k",
    "BackendEndpoint", "DialogHistory", "HttpGateway", "ImageBlob", "MockGateway",
    "MockWorld", "MockWorldConfig",
    "FeedbackMode", "RoundRecord", "SessionConfig", "SessionEngine", "SessionTrace",
]

__version__ = "0.1.0"
