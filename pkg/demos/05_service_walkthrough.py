# Driving the HTTP session service
#
# The same engine can be exposed as an HTTP API for live human-in-the-loop
# sessions. Here we mount the FastAPI app on an in-process test client and
# walk through a full session: create, post rounds, fetch images, complete.

import numpy as np
from fastapi.testclient import TestClient

from genir import ImageRecord, build_index
from genir.gateway import MockGateway, mock_image_provider
from genir.mockworld import MockWorld, MockWorldConfig, serialize_query
from genir.service import create_app
from genir.session import SessionEngine

rng = np.random.default_rng(9)
dim = 32
index = build_index([ImageRecord(id=f"img{i:04d}", embedding=rng.normal(size=dim))
                     for i in range(200)], dim=dim)
world = MockWorld(MockWorldConfig(dim=dim, noise_sigma_0=2.0, seed=9))
engine = SessionEngine(index, MockGateway(world),
                       image_provider=mock_image_provider(world, index))
client = TestClient(create_app(engine))

print(client.get("/api/health").json())

# Create a generative session. In live use the human has the target in mind;
# the service only needs a target_id when it should track ranks for you.
resp = client.post("/api/sessions", json={"mode": "generative", "k": 5,
                                          "max_rounds": 5,
                                          "target_id": "img0077"})
sid = resp.json()["session_id"]
print(f"created session {sid} -> {resp.status_code}")

# Post a couple of rounds. The mock world understands vector-carrying query
# strings, so we can steer directly toward the target embedding.
target_vec = index.embedding_of("img0077")
for t in range(2):
    query = serialize_query(t, target_vec)
    body = client.post(f"/api/sessions/{sid}/rounds",
                       json={"query": query}).json()
    top = body["retrieved"][0]
    print(f"round {body['round']}: top-1 {top['id']} "
          f"(cos={top['similarity']:.3f}), "
          f"synthetic image at {body['synthetic_image_url']}")

    # every image URL in the response is servable
    img = client.get(body["synthetic_image_url"])
    print(f"  fetched synthetic image: {img.status_code}, "
          f"{img.headers['content-type']}, {len(img.content)} bytes")

# The human spots the target in the grid and marks it found.
done = client.post(f"/api/sessions/{sid}/complete",
                   json={"found_id": "img0077"}).json()
print(f"completed: status={done['status']}, rounds={len(done['rounds'])}")
