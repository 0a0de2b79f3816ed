# A simulated interactive retrieval session
#
# A session starts from a text query, generates a synthetic image of that
# query, embeds it, and retrieves the top-K database images. The agent then
# refines the query from the synthetic image (the "generative" feedback
# channel) and the loop repeats. With the deterministic mock backends the
# whole loop runs in-process.

import numpy as np

from genir import ImageRecord, build_index
from genir.gateway import MockGateway, mock_image_provider
from genir.mockworld import MockWorld, MockWorldConfig
from genir.session import FeedbackMode, SessionConfig, SessionEngine

rng = np.random.default_rng(7)
dim = 32
index = build_index([ImageRecord(id=f"img{i:04d}", embedding=rng.normal(size=dim))
                     for i in range(500)], dim=dim)

# The mock world controls how hard the search is: noise_sigma_0 blurs the
# initial mental image, alpha is how aggressively the agent moves the query
# toward the target each round.
world = MockWorld(MockWorldConfig(dim=dim, noise_sigma_0=3.0, noise_decay=0.8,
                                  seed=1, alpha=0.5))
engine = SessionEngine(index, MockGateway(world),
                       image_provider=mock_image_provider(world, index),
                       latency_mode="simulated")

config = SessionConfig(mode=FeedbackMode("generative"), k=10, max_rounds=10,
                       success_rule="topk", stop_on_success=True)
target = "img0123"
trace = engine.run_simulated_session(config, target, session_id="demo")

print(f"target {target}, status: {trace.status}")
print("round  rank  top-1      in top-10?")
for record in trace.rounds:
    hit = "yes" if record.rank_of_target <= config.k else "no"
    print(f"{record.round:5d}  {record.rank_of_target:4d}  "
          f"{record.retrieved.ids[0]}  {hit}")

# Each generative round also stored the synthetic image it searched with.
ref = trace.rounds[0].synthetic_image_ref
blob = engine.image_store[ref]
print(f"synthetic image for round 0: {ref} ({len(blob.data)} bytes, "
      f"{blob.format})")
