import httpx
import numpy as np
import pytest
from fastapi.testclient import TestClient

from genir.gateway import MockGateway, mock_image_provider
from genir.index import ImageRecord, build_index
from genir.mockworld import MockWorld, MockWorldConfig
from genir.session import SessionEngine


def random_index(n, dim, seed):
    rng = np.random.default_rng(seed)
    records = [ImageRecord(id=f"img{i:05d}", embedding=rng.normal(size=dim))
               for i in range(n)]
    return build_index(records, dim=dim)


def mock_engine(index, sigma=3.0, decay=0.8, seed=0, alpha=0.5,
                latency_mode="simulated"):
    world = MockWorld(MockWorldConfig(dim=index.dim, noise_sigma_0=sigma,
                                      noise_decay=decay, seed=seed, alpha=alpha))
    gateway = MockGateway(world)
    provider = mock_image_provider(world, index)
    return SessionEngine(index, gateway, image_provider=provider,
                         latency_mode=latency_mode)


@pytest.fixture
def small_index():
    return random_index(100, 16, seed=42)


@pytest.fixture
def small_engine(small_index):
    return mock_engine(small_index, sigma=2.0, seed=7)


class AppTransport(httpx.BaseTransport):
    """Sync httpx transport routing requests into an ASGI app under test."""

    def __init__(self, app):
        self.client = TestClient(app)

    def handle_request(self, request):
        resp = self.client.request(
            request.method, str(request.url), content=request.read(),
            headers=dict(request.headers))
        return httpx.Response(resp.status_code, content=resp.content,
                              headers=resp.headers)


def brute_force_order(index, query):
    """Exhaustive float64 ordering with insertion-order tie-break."""
    sims = index.vectors.astype(np.float64) @ np.asarray(query, dtype=np.float64)
    order = sorted(range(index.size), key=lambda i: (-sims[i], i))
    return order, sims
