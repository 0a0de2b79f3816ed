import threading

import numpy as np
import pytest
from fastapi.testclient import TestClient

from genir.curation import read_trajectories
from genir.errors import BackendTimeout
from genir.index import normalize, top_k
from genir.mockworld import serialize_query
from genir.pngvec import decode_vector_png
from genir.service import create_app

from conftest import mock_engine, random_index


@pytest.fixture
def index():
    return random_index(80, 16, seed=13)


@pytest.fixture
def engine(index):
    return mock_engine(index, sigma=2.0, seed=3)


@pytest.fixture
def app(engine, tmp_path):
    return create_app(engine, trajectory_log=str(tmp_path / "log.jsonl"))


@pytest.fixture
def client(app):
    return TestClient(app)


def create(client, **overrides):
    body = {"mode": "generative", "k": 10, "max_rounds": 5,
            "target_id": "img00007"}
    body.update(overrides)
    resp = client.post("/api/sessions", json=body)
    assert resp.status_code == 201
    return resp.json()["session_id"]


def oracle_query(index, target, rnd=0):
    return serialize_query(rnd, index.embedding_of(target))


# --- lifecycle --------------------------------------------------------------------

def test_health(client, index):
    body = client.get("/api/health").json()
    assert body == {"status": "ok", "index_size": 80, "dim": 16}


def test_create_and_get(client):
    sid = create(client)
    body = client.get(f"/api/sessions/{sid}").json()
    assert body["session_id"] == sid
    assert body["status"] == "running"
    assert body["rounds"] == []
    assert body["mode"] == "generative"
    assert body["k"] == 10


def test_create_invalid_mode(client):
    resp = client.post("/api/sessions", json={"mode": "psychic"})
    assert resp.status_code == 400


def test_create_unknown_target(client):
    resp = client.post("/api/sessions", json={"mode": "verbal",
                                              "target_id": "missing"})
    assert resp.status_code == 404


def test_get_unknown_session(client):
    assert client.get("/api/sessions/nope").status_code == 404


# --- rounds ------------------------------------------------------------------------

def test_round_returns_topk(client, index):
    sid = create(client)
    resp = client.post(f"/api/sessions/{sid}/rounds",
                       json={"query": oracle_query(index, "img00007")})
    assert resp.status_code == 200
    body = resp.json()
    assert body["round"] == 0
    assert len(body["retrieved"]) == 10
    sims = [e["similarity"] for e in body["retrieved"]]
    assert sims == sorted(sims, reverse=True)
    assert body["synthetic_image_url"].startswith("/api/images/")


def test_round_empty_query(client):
    sid = create(client)
    resp = client.post(f"/api/sessions/{sid}/rounds", json={"query": "  "})
    assert resp.status_code == 400


def test_round_after_exhaustion_410(client, index):
    sid = create(client, mode="verbal", max_rounds=1)
    for _ in range(2):
        assert client.post(f"/api/sessions/{sid}/rounds",
                           json={"query": "red bicycle"}).status_code == 200
    resp = client.post(f"/api/sessions/{sid}/rounds", json={"query": "again"})
    assert resp.status_code == 410


def test_round_gateway_failure_502(client, engine, index):
    sid = create(client, mode="verbal")

    class Broken:
        def embed_text(self, text):
            raise BackendTimeout("slow backend", stage="text_embedder")

    engine.gateway = Broken()
    resp = client.post(f"/api/sessions/{sid}/rounds", json={"query": "hi"})
    assert resp.status_code == 502
    assert resp.json()["detail"]["stage"] == "text_embedder"


def test_round_in_flight_409(app, client, engine, index):
    sid = create(client)
    entered = threading.Event()
    release = threading.Event()
    inner = engine.gateway

    class Slow:
        def __getattr__(self, name):
            return getattr(inner, name)

        def generate_image(self, prompt, seed):
            entered.set()
            release.wait(timeout=10)
            return inner.generate_image(prompt, seed)

    engine.gateway = Slow()
    results = {}

    def first():
        # own client: the shared one would serialize the two requests
        results["first"] = TestClient(app).post(
            f"/api/sessions/{sid}/rounds",
            json={"query": oracle_query(index, "img00007")}).status_code

    worker = threading.Thread(target=first)
    worker.start()
    assert entered.wait(timeout=10)
    second = client.post(f"/api/sessions/{sid}/rounds",
                         json={"query": "collide"}).status_code
    release.set()
    worker.join()
    assert second == 409
    assert results["first"] == 200


# --- completion and trajectory log ----------------------------------------------------

def test_complete_success_and_log(client, index, tmp_path):
    sid = create(client, max_rounds=3)
    for t in range(2):
        client.post(f"/api/sessions/{sid}/rounds",
                    json={"query": oracle_query(index, "img00007", rnd=t)})
    resp = client.post(f"/api/sessions/{sid}/complete",
                       json={"found_id": "img00007"})
    assert resp.status_code == 200
    assert resp.json()["status"] == "succeeded"
    records = read_trajectories(tmp_path / "log.jsonl")
    assert len(records) == 2
    assert [r.round for r in records] == [0, 1]
    assert all(r.session_id == sid for r in records)


def test_complete_abandon(client):
    sid = create(client)
    resp = client.post(f"/api/sessions/{sid}/complete", json={})
    assert resp.json()["status"] == "abandoned"
    # already finished: further completion is 410
    assert client.post(f"/api/sessions/{sid}/complete",
                       json={}).status_code == 410


def test_complete_unknown_found_id(client):
    sid = create(client)
    resp = client.post(f"/api/sessions/{sid}/complete",
                       json={"found_id": "ghost"})
    assert resp.status_code == 404


# --- images ------------------------------------------------------------------------

def test_synthetic_image_url_round_trips(client, engine, index):
    sid = create(client)
    body = client.post(f"/api/sessions/{sid}/rounds",
                       json={"query": oracle_query(index, "img00007")}).json()
    img = client.get(body["synthetic_image_url"])
    assert img.status_code == 200
    assert img.headers["content-type"] == "image/png"
    # the served bytes decode to the exact embedding the round retrieved with
    embedding = normalize(decode_vector_png(img.content), index.dim)
    recomputed = top_k(index, embedding, k=10)
    assert list(recomputed.ids) == [e["id"] for e in body["retrieved"]]


def test_db_image_url(client, index):
    resp = client.get("/api/images/db/img00004")
    assert resp.status_code == 200
    embedding = normalize(decode_vector_png(resp.content), index.dim)
    assert np.allclose(embedding, index.embedding_of("img00004"), atol=1e-6)


def test_unknown_image_404(client):
    assert client.get("/api/images/db/none").status_code == 404
    assert client.get("/api/images/whatever.png").status_code == 404


# --- concurrency -------------------------------------------------------------------

def test_concurrent_session_creation(client):
    ids, errors = [], []

    def mk():
        try:
            ids.append(create(client, target_id=None, mode="verbal"))
        except Exception as exc:  # pragma: no cover - diagnostic
            errors.append(exc)

    threads = [threading.Thread(target=mk) for _ in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    assert len(set(ids)) == 16
