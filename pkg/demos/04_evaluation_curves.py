# Hits@K curves and hybrid feedback analysis
#
# The evaluation harness turns trajectory records into Hits@K-vs-dialog-length
# curves, compares feedback channels, and computes the hybrid oracle / random
# select rates for mixing a verbal and a visual channel.

import numpy as np

from genir import ImageRecord, build_index
from genir.curation import trace_to_records
from genir.evaluation import (
    compare_modes,
    curves_to_csv,
    hybrid_report,
    latency_report,
)
from genir.gateway import MockGateway, mock_image_provider
from genir.mockworld import MockWorld, MockWorldConfig
from genir.session import FeedbackMode, SessionConfig, SessionEngine

rng = np.random.default_rng(5)
dim = 32
index = build_index([ImageRecord(id=f"img{i:04d}", embedding=rng.normal(size=dim))
                     for i in range(400)], dim=dim)


def run_mode(kind, sigma, n=150, max_rounds=8):
    # a noisier world stands in for the weaker feedback channel
    world = MockWorld(MockWorldConfig(dim=dim, noise_sigma_0=sigma,
                                      noise_decay=0.8, seed=11, alpha=0.5))
    engine = SessionEngine(index, MockGateway(world),
                           image_provider=mock_image_provider(world, index),
                           latency_mode="simulated")
    config = SessionConfig(mode=FeedbackMode(kind), k=10, max_rounds=max_rounds,
                           success_rule="rank1", stop_on_success=False)
    records = []
    for i in range(n):
        trace = engine.run_simulated_session(config, index.ids[i],
                                             session_id=f"{kind}{i:04d}")
        records.extend(trace_to_records(trace))
    return records


verbal = run_mode("verbal", sigma=3.0)
visual = run_mode("generative", sigma=1.5)

# Cumulative Hits@10 per dialog length, one CSV column per mode.
table = compare_modes({"verbal": verbal, "generative": visual}, k=10)
print(curves_to_csv(table))

# The hybrid report mixes the two channels: the oracle picks the better
# channel per query (union of hits); random select picks the visual channel
# with probability p.
report = hybrid_report(verbal, visual, k=10, p=0.223)
print("len  verbal  visual  oracle  random")
for row in report["rows"]:
    print(f"{row['dialog_length']:3d}  {row['verbal']:6.2f}  "
          f"{row['visual']:6.2f}  {row['oracle']:6.2f}  "
          f"{row['random_select']:6.2f}")

# Latency profile per pipeline stage (simulated timings here).
stages = latency_report(visual)["generative"]["stages"]
print("\nstage     mean(ms)  p95(ms)")
for stage, stats in stages.items():
    if stats is not None:
        print(f"{stage:9s} {stats['mean']:8.0f}  {stats['p95']:7.0f}")
